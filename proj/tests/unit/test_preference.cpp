#include "popbo/preference.hpp"
#include "popbo/types.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace popbo;

TEST_SUITE("preference") {
  TEST_CASE("btl_prob examples") {
    CHECK(btl_prob(0.3, 0.3) == 0.5);
    CHECK(btl_prob(1.0, 0.0) == doctest::Approx(0.7310586).epsilon(1e-7));
    CHECK(btl_prob(2.0, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
    CHECK(btl_prob(2.0, 0.0) == doctest::Approx(link_constants(1.0).sigma_hi).epsilon(1e-15));
  }

  TEST_CASE("btl_prob is complementary, increasing and saturates without overflow") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
      const double y = rng.uniform(-50, 50), yp = rng.uniform(-50, 50);
      const double p = btl_prob(y, yp);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      CHECK(p + btl_prob(yp, y) == doctest::Approx(1.0).epsilon(1e-15));
      const double d = rng.uniform(1e-3, 1.0);
      CHECK(btl_prob(y + d, yp) >= p);
    }
    for (int i = -20; i < 20; ++i) CHECK(btl_prob(0.5 * (i + 1), 0.0) > btl_prob(0.5 * i, 0.0));
    CHECK(std::isfinite(btl_prob(1e4, -1e4)));
    CHECK(btl_prob(1e4, -1e4) == 1.0);
    CHECK(btl_prob(-1e4, 1e4) == 0.0);
    CHECK(std::isfinite(log_logistic(-1e4)));
    CHECK(log_logistic(-1e4) == doctest::Approx(-1e4));
  }

  TEST_CASE("sample_preference") {
    Rng rng(42);
    CHECK(sample_preference(rng, 1.0) == 1);
    CHECK(sample_preference(rng, 0.0) == 0);
    CHECK_THROWS_AS(sample_preference(rng, 1.5), InputError);
    CHECK_THROWS_AS(sample_preference(rng, -0.1), InputError);
    CHECK_THROWS_AS(sample_preference(rng, std::nan("")), InputError);

    Rng a(7), b(7);
    int ones = 0;
    for (int i = 0; i < 10000; ++i) {
      const int s = sample_preference(a, 0.5);
      CHECK(s == sample_preference(b, 0.5));
      ones += s;
    }
    CHECK(std::abs(ones / 10000.0 - 0.5) <= 0.02);
  }

  TEST_CASE("Rng sub-streams are deterministic and distinct") {
    const Rng root(99);
    Rng s1 = root.split("oracle"), s2 = root.split("oracle"), s3 = root.split("instance");
    Rng i1 = root.split(std::uint64_t{1}), i2 = root.split(std::uint64_t{2});
    CHECK(s1.uniform() == s2.uniform());
    CHECK(s1.seed() != s3.seed());
    CHECK(i1.seed() != i2.seed());
    CHECK(Rng(5).split("x").seed() == Rng(5).split("x").seed());
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
      const auto k = r.below(7);
      CHECK(k < 7);
      const double u = r.uniform(2.0, 3.0);
      CHECK(u >= 2.0);
      CHECK(u < 3.0);
    }
  }

  TEST_CASE("link_constants examples and identities") {
    const LinkConstants c1 = link_constants(1.0);
    CHECK(c1.sigma_lo == doctest::Approx(0.1192029).epsilon(1e-7));
    CHECK(c1.sigma_lo == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));
    CHECK(c1.c_l == doctest::Approx(1.0 + 2.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));

    const LinkConstants tiny = link_constants(1e-12);
    CHECK(tiny.sigma_lo == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(tiny.sigma_hi == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(tiny.b_p) <= 1e-10);

    for (double b : {1e-6, 0.1, 0.5, 1.0, 2.0, 5.0}) {
      const LinkConstants c = link_constants(b);
      CAPTURE(b);
      CHECK(c.dsigma_hi == 0.25);
      CHECK(c.sigma_lo + c.sigma_hi == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(c.sigma_lo > 0.0);
      CHECK(c.sigma_lo <= 0.5);
      CHECK(c.sigma_hi >= 0.5);
      CHECK(c.sigma_hi < 1.0);
      CHECK(c.b_p == doctest::Approx(c.sigma_hi / c.sigma_lo - c.sigma_lo / c.sigma_hi).epsilon(1e-15));
      CHECK(c.h_sigma == doctest::Approx(1.0 / (2.0 * c.sigma_hi * c.sigma_hi)).epsilon(1e-15));
      CHECK(c.c_l == doctest::Approx(1.0 + 2.0 / (1.0 + std::exp(-2.0 * b))).epsilon(1e-15));
      CHECK(c.dsigma_lo > 0.0);
      CHECK(c.dsigma_lo <= c.dsigma_hi);
    }
  }

  TEST_CASE("btl_prob and its slope stay inside the link bounds on the valid range") {
    Rng rng(8);
    for (double b : {0.5, 1.0, 3.0}) {
      const LinkConstants c = link_constants(b);
      for (int i = 0; i < 2000; ++i) {
        const double y = rng.uniform(-b, b), yp = rng.uniform(-b, b);
        const double p = btl_prob(y, yp);
        CHECK(p >= c.sigma_lo);
        CHECK(p <= c.sigma_hi);
        const double h = 1e-6;
        const double slope = (btl_prob(y + h, yp) - btl_prob(y - h, yp)) / (2 * h);
        CHECK(slope >= c.dsigma_lo * (1 - 1e-6));
        CHECK(slope <= c.dsigma_hi * (1 + 1e-6));
      }
    }
  }
}
