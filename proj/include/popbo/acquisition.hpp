#ifndef POPBO_ACQUISITION_HPP
#define POPBO_ACQUISITION_HPP

#include "popbo/preference.hpp"
#include "popbo/solver.hpp"
#include "popbo/types.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace popbo {

enum class Execution { Serial, Parallel };

/// Candidate generation for the outer maximization over x.
struct OuterSearchOptions {
  int grid_1d = 101;
  int grid_2d = 41;      // per axis
  int lhs_starts = 32;   // d >= 3
  int refine_steps = 50; // coordinate-search iterations per start, d >= 3
};

void to_json(nlohmann::json& j, const OuterSearchOptions& o);
void from_json(const nlohmann::json& j, OuterSearchOptions& o);

/// Uniform grid for d <= 2 (first coordinate varies slowest). Degenerate axes
/// (lo == hi) contribute a single value. Throws InputError for d >= 3.
PointList candidate_grid(const Box& domain, const OuterSearchOptions& options);

/// Latin-hypercube sample of `count` points.
PointList latin_hypercube(const Box& domain, int count, Rng& rng);

/// Optimistic advantage at every candidate. The parallel version distributes
/// candidates over OpenMP threads; both return identical values.
std::vector<double> evaluate_advantages(const ConfidenceSet& set, std::span<const Point> candidates,
                                        Execution exec = Execution::Parallel);

struct AcquisitionResult {
  Point x;
  double advantage = 0.0;
  std::size_t index = 0;        // position in the evaluated candidate list
  std::size_t evaluations = 0;  // inner solves performed
};

/// argmax over candidates, ties to the lowest index.
std::size_t argmax_first(std::span<const double> values);

/// Outer search: grid (d <= 2) or Latin-hypercube starts refined by coordinate
/// search (d >= 3). The reference point is always appended as a final
/// candidate, so the result's advantage is never negative.
AcquisitionResult maximize_acquisition(const Box& domain, const ConfidenceSet& set, const Point& reference,
                                       const OuterSearchOptions& options, Rng& rng,
                                       Execution exec = Execution::Parallel);

AcquisitionResult maximize_acquisition(const Box& domain, const History& history, const KernelSpec& kernel,
                                       double norm_bound, double beta1, double ell_mle, double jitter,
                                       const OuterSearchOptions& options, Rng& rng,
                                       Execution exec = Execution::Parallel);

}  // namespace popbo

#endif
