#include "popbo/acquisition.hpp"

#include <algorithm>
#include <numeric>

namespace popbo {

void to_json(nlohmann::json& j, const OuterSearchOptions& o) {
  j = nlohmann::json{{"grid_1d", o.grid_1d},
                     {"grid_2d", o.grid_2d},
                     {"lhs_starts", o.lhs_starts},
                     {"refine_steps", o.refine_steps}};
}

void from_json(const nlohmann::json& j, OuterSearchOptions& o) {
  OuterSearchOptions d;
  o.grid_1d = j.value("grid_1d", d.grid_1d);
  o.grid_2d = j.value("grid_2d", d.grid_2d);
  o.lhs_starts = j.value("lhs_starts", d.lhs_starts);
  o.refine_steps = j.value("refine_steps", d.refine_steps);
  if (o.grid_1d < 1 || o.grid_2d < 1 || o.lhs_starts < 1 || o.refine_steps < 0)
    throw InputError("outer search sizes must be positive");
}

namespace {

std::vector<double> axis(double lo, double hi, int count) {
  if (lo == hi || count == 1) return {lo};
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  v.back() = hi;
  return v;
}

}  // namespace

PointList candidate_grid(const Box& domain, const OuterSearchOptions& options) {
  const int d = domain.dim();
  PointList pts;
  if (d == 1) {
    for (double v : axis(domain.lo[0], domain.hi[0], options.grid_1d)) pts.push_back(Point::Constant(1, v));
  } else if (d == 2) {
    const auto a0 = axis(domain.lo[0], domain.hi[0], options.grid_2d);
    const auto a1 = axis(domain.lo[1], domain.hi[1], options.grid_2d);
    pts.reserve(a0.size() * a1.size());
    for (double u : a0)
      for (double v : a1) pts.push_back((Point(2) << u, v).finished());
  } else {
    throw InputError("grid candidates are only used for d <= 2");
  }
  return pts;
}

PointList latin_hypercube(const Box& domain, int count, Rng& rng) {
  const int d = domain.dim();
  PointList pts(static_cast<std::size_t>(count), Point(d));
  std::vector<int> perm(static_cast<std::size_t>(count));
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    for (int i = 0; i < count; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / count;
      pts[static_cast<std::size_t>(i)][j] = domain.lo[j] + u * (domain.hi[j] - domain.lo[j]);
    }
  }
  return pts;
}

std::vector<double> evaluate_advantages(const ConfidenceSet& set, std::span<const Point> candidates,
                                        Execution exec) {
  // Consecutive candidates are neighbours, so each solve is seeded with the
  // previous one's multipliers. Blocks are fixed so the values do not depend on
  // the thread count.
  constexpr std::ptrdiff_t kBlock = 16;
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  const std::ptrdiff_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> values(candidates.size());
  auto run_block = [&](std::ptrdiff_t blk) {
    AdvantageHint hint;
    const std::ptrdiff_t end = std::min(n, (blk + 1) * kBlock);
    for (std::ptrdiff_t i = blk * kBlock; i < end; ++i)
      values[i] = set.optimistic_advantage(candidates[i], &hint).objective;
  };
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) run_block(blk);
    return values;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) run_block(blk);
  return values;
}

std::size_t argmax_first(std::span<const double> values) {
  if (values.empty()) throw InputError("argmax over an empty candidate set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

namespace {

struct Refined {
  Point x;
  double value;
  std::size_t evaluations;
};

// Coordinate search from one start; step halves whenever no axis move improves.
Refined refine(const Box& domain, const ConfidenceSet& set, Point x, double value, int steps) {
  Vector h = 0.25 * domain.width();
  std::size_t evals = 0;
  AdvantageHint hint;
  for (int s = 0; s < steps; ++s) {
    bool moved = false;
    for (int j = 0; j < domain.dim(); ++j) {
      for (double sign : {1.0, -1.0}) {
        Point y = x;
        y[j] += sign * h[j];
        y = domain.clamp(y);
        if (y == x) continue;
        const double v = set.optimistic_advantage(y, &hint).objective;
        ++evals;
        if (v > value) {
          x = std::move(y);
          value = v;
          moved = true;
          break;
        }
      }
    }
    if (!moved) h *= 0.5;
  }
  return {std::move(x), value, evals};
}

}  // namespace

AcquisitionResult maximize_acquisition(const Box& domain, const ConfidenceSet& set, const Point& reference,
                                       const OuterSearchOptions& options, Rng& rng, Execution exec) {
  if (reference.size() != domain.dim()) throw InputError("reference point has wrong dimension");
  PointList candidates;
  std::vector<double> values;
  std::size_t evaluations = 0;

  if (domain.dim() <= 2) {
    candidates = candidate_grid(domain, options);
    candidates.push_back(reference);
    values = evaluate_advantages(set, candidates, exec);
    evaluations = candidates.size();
  } else {
    PointList starts = latin_hypercube(domain, options.lhs_starts, rng);
    const std::vector<double> start_values = evaluate_advantages(set, starts, exec);
    std::vector<Refined> refined(starts.size());
    const auto n = static_cast<std::ptrdiff_t>(starts.size());
    if (exec == Execution::Serial) {
      for (std::ptrdiff_t i = 0; i < n; ++i)
        refined[i] = refine(domain, set, starts[i], start_values[i], options.refine_steps);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t i = 0; i < n; ++i)
        refined[i] = refine(domain, set, starts[i], start_values[i], options.refine_steps);
    }
    evaluations = starts.size();
    for (auto& r : refined) {
      candidates.push_back(std::move(r.x));
      values.push_back(r.value);
      evaluations += r.evaluations;
    }
    candidates.push_back(reference);
    values.push_back(set.optimistic_advantage(reference).objective);
    ++evaluations;
  }

  const std::size_t best = argmax_first(values);
  return {candidates[best], values[best], best, evaluations};
}

AcquisitionResult maximize_acquisition(const Box& domain, const History& history, const KernelSpec& kernel,
                                       double norm_bound, double beta1, double ell_mle, double jitter,
                                       const OuterSearchOptions& options, Rng& rng, Execution exec) {
  DuelModel model(history, kernel, norm_bound, jitter);
  SolveReport mle = solve_mle(model);
  if (ell_mle > mle.objective + 1e-6) throw NumericalError("supplied MLE value exceeds the attainable maximum");
  mle.objective = ell_mle;
  ConfidenceSet set(std::move(model), std::move(mle), beta1);
  return maximize_acquisition(domain, set, history.last_point(), options, rng, exec);
}

}  // namespace popbo
