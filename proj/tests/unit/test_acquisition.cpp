#include "popbo/acquisition.hpp"
#include "popbo/session.hpp"

#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace popbo;

namespace {

Point p1(double a) { return Point::Constant(1, a); }

History random_history(Rng& rng, const Box& domain, std::size_t t) {
  auto draw = [&] {
    Point x(domain.dim());
    for (int j = 0; j < domain.dim(); ++j) x[j] = rng.uniform(domain.lo[j], domain.hi[j]);
    return x;
  };
  History h(draw());
  for (std::size_t i = 0; i < t; ++i) h.append(draw(), rng.uniform() < 0.5 ? 1 : 0);
  return h;
}

ConfidenceSet make_set(const History& h, const KernelSpec& k, double bound, double beta) {
  DuelModel model(h, k, bound, 1e-6);
  SolveReport mle = solve_mle(model);
  return ConfidenceSet(std::move(model), std::move(mle), beta);
}

}  // namespace

TEST_SUITE("acquisition") {
  TEST_CASE("candidate grids") {
    OuterSearchOptions o;
    const PointList g1 = candidate_grid(Box::uniform(1, -1.0, 2.0), o);
    REQUIRE(g1.size() == 101);
    CHECK(g1.front()[0] == -1.0);
    CHECK(g1.back()[0] == 2.0);
    CHECK(g1[50][0] == doctest::Approx(0.5).epsilon(1e-15));

    o.grid_2d = 3;
    const PointList g2 = candidate_grid(Box::uniform(2, 0.0, 1.0), o);
    REQUIRE(g2.size() == 9);
    CHECK(g2[1] == (Point(2) << 0.0, 0.5).finished());
    CHECK(g2[3] == (Point(2) << 0.5, 0.0).finished());

    const Box flat((Vector(2) << 0.3, 0.0).finished(), (Vector(2) << 0.3, 1.0).finished());
    const PointList g3 = candidate_grid(flat, o);
    CHECK(g3.size() == 3);
    for (const auto& p : g3) CHECK(p[0] == 0.3);

    CHECK_THROWS_AS(candidate_grid(Box::uniform(3, 0.0, 1.0), o), InputError);
    CHECK_THROWS_AS(nlohmann::json({{"grid_1d", 0}}).get<OuterSearchOptions>(), InputError);
    const nlohmann::json j = o;
    CHECK(j.get<OuterSearchOptions>().grid_2d == 3);
  }

  TEST_CASE("Latin hypercube hits every stratum once per axis") {
    const Box box((Vector(3) << 0, -1, 10).finished(), (Vector(3) << 1, 1, 20).finished());
    Rng a(4), b(4);
    const PointList s = latin_hypercube(box, 32, a);
    REQUIRE(s.size() == 32);
    for (int j = 0; j < 3; ++j) {
      std::set<int> strata;
      for (const auto& p : s) {
        CHECK(box.contains(p));
        strata.insert(static_cast<int>(std::floor((p[j] - box.lo[j]) / box.width()[j] * 32)));
      }
      CHECK(strata.size() == 32);
    }
    const PointList again = latin_hypercube(box, 32, b);
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == again[i]);
  }

  TEST_CASE("argmax_first breaks ties toward the lowest index") {
    const std::vector<double> v{1.0, 3.0, 2.0, 3.0};
    CHECK(argmax_first(v) == 1);
    CHECK_THROWS_AS(argmax_first(std::vector<double>{}), InputError);
  }

  TEST_CASE("zero width and empty history pick the grid point farthest in RKHS distance") {
    const KernelSpec k = KernelSpec::squared_exponential(1, 1.0, 0.5);
    const History h(p1(0.4));
    const Box domain = Box::uniform(1, 0.0, 1.0);
    Rng rng(1);
    const double bound = 1.5, eps = 1e-6;
    const AcquisitionResult r = maximize_acquisition(domain, h, k, bound, 0.0, 0.0, eps, {}, rng);
    CHECK(r.x[0] == 1.0);
    const double expect = bound * std::sqrt(2 + 2 * eps - 2 * eval_kernel(k, p1(1.0), p1(0.4)));
    CHECK(r.advantage == doctest::Approx(expect).epsilon(1e-6));
    for (const auto& x : candidate_grid(domain, {})) {
      const double v = bound * std::sqrt(2 + 2 * eps - 2 * eval_kernel(k, x, p1(0.4)));
      CHECK(v <= expect + 1e-12);
    }
  }

  TEST_CASE("a single-point domain returns that point") {
    const KernelSpec k = KernelSpec::squared_exponential(1, 1.0, 1.0);
    History h(p1(0.3));
    h.append(p1(0.3), 1);
    const Box domain = Box::uniform(1, 0.3, 0.3);
    const ConfidenceSet set = make_set(h, k, 1.0, 1.0);
    Rng rng(2);
    const AcquisitionResult r = maximize_acquisition(domain, set, h.last_point(), {}, rng);
    CHECK(r.x[0] == 0.3);
    CHECK(r.advantage == set.optimistic_advantage(p1(0.3)).objective);
  }

  TEST_CASE("the 1-D result dominates every grid value and respects the closed-form bound") {
    const KernelSpec k = KernelSpec::squared_exponential(1, 1.0, 1.0);
    const Box domain = Box::uniform(1, 0.0, 5.0);
    Rng rng(3);
    for (int rep = 0; rep < 4; ++rep) {
      const History h = random_history(rng, domain, 2 + static_cast<std::size_t>(rep) * 3);
      const ConfidenceSet set = make_set(h, k, 2.0, beta1(h.size() + 1, 1.0));
      Rng search(rep);
      const AcquisitionResult r = maximize_acquisition(domain, set, h.last_point(), {}, search);
      CHECK(r.advantage >= 0.0);
      for (const auto& x : candidate_grid(domain, {})) {
        const SolveReport cold = set.optimistic_advantage(x);
        CAPTURE(rep);
        CAPTURE(x[0]);
        CHECK(cold.converged);
        CHECK(r.advantage >= cold.objective - 1e-6);
        CHECK(cold.objective >= -1e-6);
        CHECK(cold.objective <= set.unconstrained_advantage(x) + 1e-9);
      }
    }
  }

  TEST_CASE("seeded solves along a grid agree with cold solves") {
    const KernelSpec k = KernelSpec::squared_exponential(1, 9.0, 1.0);
    const Box domain = Box::uniform(1, 0.0, 10.0);
    Rng rng(5);
    const History h = random_history(rng, domain, 12);
    const ConfidenceSet set = make_set(h, k, 4.0, beta1(13, 1.0));
    const PointList grid = candidate_grid(domain, {});
    const std::vector<double> seeded = evaluate_advantages(set, grid, Execution::Serial);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double cold = set.optimistic_advantage(grid[i]).objective;
      CAPTURE(i);
      CHECK(std::abs(seeded[i] - cold) <= 1e-6 * (1 + std::abs(cold)));
    }
  }

  TEST_CASE("serial and parallel evaluation give identical values") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(4);
    Rng rng(6);
    for (int d = 1; d <= 2; ++d) {
      const KernelSpec k = KernelSpec::squared_exponential(d, 1.0, 0.3);
      const Box domain = Box::uniform(d, 0.0, 1.0);
      const History h = random_history(rng, domain, 8);
      const ConfidenceSet set = make_set(h, k, 2.0, beta1(9, 1.0));
      OuterSearchOptions o;
      o.grid_2d = 21;
      const PointList grid = candidate_grid(domain, o);
      CHECK(evaluate_advantages(set, grid, Execution::Serial) == evaluate_advantages(set, grid, Execution::Parallel));
      Rng a(1), b(1);
      const AcquisitionResult rs = maximize_acquisition(domain, set, h.last_point(), o, a, Execution::Serial);
      const AcquisitionResult rp = maximize_acquisition(domain, set, h.last_point(), o, b, Execution::Parallel);
      CHECK(rs.x == rp.x);
      CHECK(rs.advantage == rp.advantage);
    }
    omp_set_num_threads(saved);
  }

  TEST_CASE("three dimensions use refined Latin-hypercube starts") {
    const KernelSpec k = KernelSpec::squared_exponential(3, 1.0, 0.5);
    const Box domain = Box::uniform(3, 0.0, 1.0);
    Rng rng(7);
    const History h = random_history(rng, domain, 4);
    const ConfidenceSet set = make_set(h, k, 2.0, beta1(5, 1.0));
    OuterSearchOptions o;
    o.lhs_starts = 8;
    o.refine_steps = 10;
    Rng a(11), b(11), c(11);
    const AcquisitionResult r = maximize_acquisition(domain, set, h.last_point(), o, a, Execution::Serial);
    CHECK(domain.contains(r.x));
    CHECK(r.evaluations > static_cast<std::size_t>(o.lhs_starts));
    CHECK(r.advantage >= set.optimistic_advantage(h.last_point()).objective - 1e-9);
    for (const auto& s : latin_hypercube(domain, o.lhs_starts, c))
      CHECK(r.advantage >= set.optimistic_advantage(s).objective - 1e-6);
    const AcquisitionResult again = maximize_acquisition(domain, set, h.last_point(), o, b, Execution::Parallel);
    CHECK(again.x == r.x);
    CHECK(again.advantage == r.advantage);
  }

  TEST_CASE("the reference dimension must match the domain") {
    const KernelSpec k = KernelSpec::squared_exponential(1, 1.0, 1.0);
    const ConfidenceSet set = make_set(History(p1(0.5)), k, 1.0, 1.0);
    Rng rng(0);
    CHECK_THROWS_AS(maximize_acquisition(Box::uniform(1, 0, 1), set, Point::Zero(2), {}, rng), InputError);
  }
}
