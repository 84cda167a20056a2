#include "popbo/bench.hpp"
#include "popbo/instances.hpp"
#include "popbo/session.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace popbo;

namespace {

Point p1(double a) { return Point::Constant(1, a); }

PopBoConfig small_config(std::uint64_t seed = 3) {
  PopBoConfig c;
  c.kernel = KernelSpec::squared_exponential(1, 1.0, 0.3);
  c.domain = Box::uniform(1, 0.0, 1.0);
  c.norm_bound = 2.0;
  c.x0 = p1(0.5);
  c.search.grid_1d = 41;
  c.seed = seed;
  return c;
}

// Deterministic answer pattern standing in for a human.
int scripted(std::size_t t) { return (t * 7 + 3) % 5 < 3 ? 1 : 0; }

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("beta schedule") {
    CHECK(beta1(1, 1.0) == 1.0);
    CHECK(beta1(4, 1.0) == 2.0);
    CHECK(beta1(9, 0.5) == 1.5);
    CHECK_THROWS_AS(beta1(0, 1.0), InputError);
  }

  TEST_CASE("t_star_index") {
    CHECK(t_star_index(std::vector<double>{3.0, 1.2, 2.5}) == 2);
    CHECK(t_star_index(std::vector<double>{0.7}) == 1);
    CHECK(t_star_index(std::vector<double>{2.0, 1.0, 1.0}) == 2);
    CHECK_THROWS_AS(t_star_index(std::vector<double>{}), InputError);
  }

  TEST_CASE("config validation and JSON round trip") {
    PopBoConfig c = small_config();
    c.labels = {{"Temperature", "degC"}};
    const nlohmann::json j = c;
    const PopBoConfig back = j.get<PopBoConfig>();
    CHECK(nlohmann::json(back) == j);

    PopBoConfig bad = small_config();
    bad.x0 = p1(1.5);
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = small_config();
    bad.beta0 = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = small_config();
    bad.labels = {{"a", ""}, {"b", ""}};
    CHECK_THROWS_AS(bad.validate(), InputError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"domain": [[0, 1]], "x0": [4]})").get<PopBoConfig>(), InputError);
    CHECK_THROWS_AS(nlohmann::json::parse(R"({"norm_bound": 1})").get<PopBoConfig>(), InputError);
    const PopBoConfig dflt = nlohmann::json::parse(R"({"domain": [[0, 2]]})").get<PopBoConfig>();
    CHECK(dflt.x0[0] == 1.0);
  }

  TEST_CASE("first query references x0 and an empty history picks a domain endpoint") {
    PopBoConfig c = small_config();
    c.kernel = KernelSpec::squared_exponential(1, 1.0, 1.0);
    c.search.grid_1d = 101;
    Session s(c);
    CHECK(s.step() == 0);
    const Duel d = s.next_query();
    CHECK(d.x_prime == p1(0.5));
    CHECK((d.x[0] == 0.0 || d.x[0] == 1.0));
    REQUIRE(s.pending());
    CHECK(s.pending()->beta == 1.0);
  }

  TEST_CASE("protocol errors") {
    Session s(small_config());
    CHECK_THROWS_AS(s.observe(1), ProtocolError);
    CHECK_THROWS_AS(s.report_t_star(), ProtocolError);
    s.next_query();
    CHECK_THROWS_AS(s.next_query(), ProtocolError);
    CHECK_THROWS_AS(s.observe(2), InputError);
    CHECK(s.pending());
    s.observe(1);
    CHECK(s.history().records().back().pref == 1);
    CHECK_FALSE(s.pending());
  }

  TEST_CASE("chaining, traces and MLE bounds over a scripted run") {
    const PopBoConfig c = small_config();
    Session s(c);
    CHECK(s.report_max_mle() == c.x0);
    const LinkConstants lc = link_constants(c.norm_bound * std::sqrt(1.0 + c.jitter));
    double best_radius = 1e300;
    for (std::size_t t = 1; t <= 8; ++t) {
      const Point last = s.history().last_point();
      const Duel d = s.next_query();
      CHECK(d.x_prime == last);
      const PendingQuery q = *s.pending();

      const auto past = s.history().duels();
      const double sigma = duel_sigma(c.kernel, past, c.lambda, d);
      CHECK(q.sigma == doctest::Approx(sigma).epsilon(1e-12));
      CHECK(q.radius == doctest::Approx(2 * (2 * c.norm_bound + std::sqrt(beta1(t, c.beta0) / c.lambda)) * sigma)
                            .epsilon(1e-12));
      CHECK(q.advantage >= 0.0);

      s.observe(scripted(t));
      CHECK(s.step() == t);
      CHECK(s.sigma_trace().size() == t);
      CHECK(s.radius_trace().size() == t);
      CHECK(s.history().records().back().x == d.x);

      CHECK(s.mle().objective <= 0.0);
      CHECK(s.mle().objective >= static_cast<double>(t) * std::log(lc.sigma_lo) - 1e-9);

      const ReportedSolution r = s.report_t_star();
      CHECK(r.t_star >= 1);
      CHECK(r.t_star <= t);
      CHECK(r.radius <= best_radius);
      best_radius = r.radius;
      CHECK(r.x == s.history().records()[r.t_star - 1].x);
      CHECK(c.domain.contains(s.report_max_mle()));
    }
    for (std::size_t i = 1; i < s.history().size(); ++i)
      CHECK(s.history().records()[i].x_prime == s.history().records()[i - 1].x);

    const nlohmann::json tr = s.trace_json();
    CHECK(tr.at("t") == 8);
    REQUIRE(tr.at("steps").size() == 8);
    CHECK(tr.at("steps").back().at("t_star") == s.report_t_star().t_star);
  }

  TEST_CASE("the first report is step 1") {
    Session s(small_config());
    s.next_query();
    s.observe(0);
    CHECK(s.report_t_star().t_star == 1);
  }

  TEST_CASE("same seed and answers replay to identical queries") {
    Session a(small_config(9)), b(small_config(9));
    for (std::size_t t = 1; t <= 6; ++t) {
      const Duel da = a.next_query(), db = b.next_query();
      CHECK(da.x == db.x);
      CHECK(da.x_prime == db.x_prime);
      a.observe(scripted(t));
      b.observe(scripted(t));
    }
    CHECK(a.radius_trace() == b.radius_trace());
    CHECK(a.mle().argmax == b.mle().argmax);
  }

  TEST_CASE("serial and parallel sessions agree") {
    Session a(small_config(4), Execution::Serial), b(small_config(4), Execution::Parallel);
    for (std::size_t t = 1; t <= 4; ++t) {
      CHECK(a.next_query().x == b.next_query().x);
      a.observe(scripted(t));
      b.observe(scripted(t));
    }
  }

  TEST_CASE("checkpoint round trip and tamper detection") {
    Session s(small_config(5));
    for (std::size_t t = 1; t <= 5; ++t) {
      s.next_query();
      s.observe(scripted(t));
    }
    s.next_query();
    const nlohmann::json cp = s.checkpoint();
    const nlohmann::json text = nlohmann::json::parse(cp.dump());
    Session r = Session::restore(text);
    CHECK(r.step() == 5);
    CHECK(r.radius_trace() == s.radius_trace());
    CHECK(r.sigma_trace() == s.sigma_trace());
    REQUIRE(r.pending());
    CHECK(r.pending()->x == s.pending()->x);
    CHECK(r.checkpoint() == cp);

    s.observe(1);
    r.observe(1);
    CHECK(s.next_query().x == r.next_query().x);

    nlohmann::json flipped = cp;
    auto& rec = flipped.at("history").at("records").at(1);
    rec.at("pref") = 1 - rec.at("pref").get<int>();
    CHECK_THROWS_AS(Session::restore(flipped), ProtocolError);

    nlohmann::json radius = cp;
    radius.at("traces").at("radius").at(2) = 123.0;
    CHECK_THROWS_AS(Session::restore(radius), ProtocolError);

    nlohmann::json moved = cp;
    moved.at("history").at("records").at(0).at("x") = nlohmann::json::array({0.123});
    CHECK_THROWS(Session::restore(moved));

    CHECK_THROWS_AS(Session::restore(nlohmann::json::object()), InputError);
  }

  TEST_CASE("norm-bound adaptation leaves a fresh session alone") {
    PopBoConfig c = small_config();
    Session s(c);
    CHECK_FALSE(s.adapt_norm_bound());
    CHECK(s.norm_bound() == c.norm_bound);
    CHECK(s.doublings() == 0);
  }

  TEST_CASE("norm-bound doubling follows the likelihood-ratio rule") {
    PopBoConfig c = small_config();
    c.norm_bound = 1.0;
    Session s(c, Execution::Serial);
    // Always prefer the point farther right. The ball of radius 2B keeps
    // gaining log-likelihood linearly in t, the threshold only grows as sqrt(t).
    bool fired = false;
    for (std::size_t t = 1; t <= 100 && !fired; ++t) {
      const Duel d = s.next_query();
      s.observe(d.x[0] > d.x_prime[0] ? 1 : 0);
      const double gain = solve_mle(DuelModel(s.history(), c.kernel, 2.0, c.jitter)).objective - s.mle().objective;
      const double threshold = c.guard_factor * beta1(t, c.beta0);
      if (std::abs(gain - threshold) < 1e-3) continue;
      Session probe = s;
      fired = probe.adapt_norm_bound();
      CAPTURE(t);
      CHECK(fired == (gain > threshold));
      if (fired) {
        CHECK(probe.norm_bound() == 2.0);
        CHECK(probe.doublings() == 1);
        CHECK(probe.mle().objective == doctest::Approx(s.mle().objective + gain).epsilon(1e-6));
      }
    }
    CHECK(fired);
  }

  TEST_CASE("automatic doubling is recorded and survives a checkpoint") {
    PopBoConfig c = small_config();
    c.norm_bound = 1.0;
    c.adapt_norm_bound = true;
    Session s(c, Execution::Serial);
    for (std::size_t t = 1; t <= 100 && s.doublings() == 0; ++t) {
      const Duel d = s.next_query();
      s.observe(d.x[0] > d.x_prime[0] ? 1 : 0);
    }
    REQUIRE(s.doublings() == 1);
    CHECK(s.norm_bound() == 2.0);
    CHECK(s.norm_bound_trace().front() == 1.0);
    CHECK(s.norm_bound_trace().back() == 2.0);
    const Session r = Session::restore(s.checkpoint(), Execution::Serial);
    CHECK(r.norm_bound() == 2.0);
    CHECK(r.norm_bound_trace() == s.norm_bound_trace());
  }
}

TEST_SUITE("calibration") {
  TEST_CASE("max-MLE report tracks the best observed value on sampled instances") {
    int good = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const GroundTruth truth = make_instance("gp-se", seed);
      BenchSpec spec;
      spec.instance = "gp-se";
      const PopBoConfig c = episode_config(spec, truth, seed);
      Session s(c, Execution::Serial);
      ComparisonOracle oracle = oracle_from_truth(truth, Rng(seed).split("oracle"));
      double best_seen = truth(c.x0);
      for (std::size_t t = 1; t <= 10; ++t) {
        const Duel d = s.next_query();
        s.observe(oracle.compare(d.x, d.x_prime));
        best_seen = std::max(best_seen, truth(d.x));
      }
      if (truth(s.report_max_mle()) >= best_seen - 0.5) ++good;
    }
    MESSAGE("max-MLE report within 0.5 of the best observed value on " << good << "/30 seeds");
    CHECK(good >= 24);
  }

  TEST_CASE("norm-bound doubling rates with a correct and a halved bound") {
    BenchSpec spec;
    spec.instance = "gp-se";
    spec.adapt_norm_bound = true;
    EpisodeOptions options;
    options.track_max_mle = false;
    int correct = 0, halved = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const GroundTruth truth = make_instance("gp-se", seed);
      for (int half = 0; half < 2; ++half) {
        PopBoConfig c = episode_config(spec, truth, seed);
        if (half == 1) c.norm_bound *= 0.5;
        Rng rng(seed);
        const EpisodeTrace tr = run_episode(c, truth, 30, rng, Execution::Serial, options);
        if (tr.steps.back().norm_bound > c.norm_bound) ++(half == 1 ? halved : correct);
      }
    }
    MESSAGE("doubling fired on " << correct << "/30 runs with the correct bound, " << halved << "/30 with it halved");
    CHECK(correct <= 3);
    CHECK(halved >= 15);
  }
}
