// Serial vs OpenMP timing for the two data-parallel loops: candidate
// advantages inside one acquisition step and whole episodes in a bench run.
#include "popbo/acquisition.hpp"
#include "popbo/bench.hpp"
#include "popbo/instances.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

using namespace popbo;

namespace {

template <class F>
double time_it(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

History random_history(const GroundTruth& truth, std::size_t t, Rng& rng) {
  History h(Point::Constant(1, 5.0));
  ComparisonOracle oracle = oracle_from_truth(truth, rng.split("oracle"));
  for (std::size_t i = 0; i < t; ++i) {
    const Point x = Point::Constant(1, rng.uniform(0.0, 10.0));
    h.append(x, oracle.compare(x, h.last_point()));
  }
  return h;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t t = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 30;
  std::printf("threads: %d\n", omp_get_max_threads());

  Rng rng(7);
  const GroundTruth truth = make_instance("gp-se", 7);
  const History h = random_history(truth, t, rng);
  DuelModel model(h, truth.kernel, truth.norm_bound, 1e-6);
  SolveReport mle = solve_mle(model);
  const ConfidenceSet set(std::move(model), std::move(mle), beta1(t + 1, 1.0));
  const PointList candidates = candidate_grid(truth.domain, OuterSearchOptions{});

  std::vector<double> serial, parallel;
  const double ts = time_it([&] { serial = evaluate_advantages(set, candidates, Execution::Serial); });
  const double tp = time_it([&] { parallel = evaluate_advantages(set, candidates, Execution::Parallel); });
  std::printf("advantages  t=%zu n=%zu  serial %.3f s  parallel %.3f s  speedup %.2f  identical %s\n", t,
              candidates.size(), ts, tp, ts / tp, serial == parallel ? "yes" : "NO");

  BenchSpec spec;
  spec.instance = "gp-se";
  spec.seeds = 4;
  spec.horizon = 10;
  BenchResult rs, rp;
  const double bs = time_it([&] { rs = run_bench(spec, Execution::Serial); });
  const double bp = time_it([&] { rp = run_bench(spec, Execution::Parallel); });
  bool same = rs.traces.size() == rp.traces.size();
  for (std::size_t i = 0; same && i < rs.traces.size(); ++i) same = episode_csv(rs.traces[i]) == episode_csv(rp.traces[i]);
  std::printf("episodes    n=%zu T=%zu  serial %.3f s  parallel %.3f s  speedup %.2f  identical %s\n", spec.seeds,
              spec.horizon, bs, bp, bs / bp, same ? "yes" : "NO");
  return serial == parallel && same ? 0 : 1;
}
