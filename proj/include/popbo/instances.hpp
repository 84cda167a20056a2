#ifndef POPBO_INSTANCES_HPP
#define POPBO_INSTANCES_HPP

#include "popbo/kernel.hpp"
#include "popbo/preference.hpp"
#include "popbo/types.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace popbo {

/// Simulated objective with its (grid) maximum. `kernel` and `norm_bound` are
/// the engine settings suited to the instance.
struct GroundTruth {
  std::string name;
  Box domain;
  std::function<double(const Point&)> evaluate;  // pure, safe to call concurrently
  double known_max = 0.0;
  Point argmax;
  KernelSpec kernel;
  double norm_bound = 1.0;
  nlohmann::json manifest;  // enough to rebuild the instance, see truth_from_manifest

  double operator()(const Point& x) const { return evaluate(x); }
  double regret(const Point& x) const { return known_max - evaluate(x); }
};

/// Fine grid used for known_max: 10001 points in 1-D, 401 x 401 in 2-D.
PointList fine_grid(const Box& domain);

struct GpSampleOptions {
  double sample_jitter = 1e-13;  // added to the clipped knot-Gram spectrum for the draw and the interpolant
  double norm_factor = 1.1;     // engine B = norm_factor * RKHS norm of the truth
};

/// Zero-mean GP draw at n_knots uniform points turned into the minimum-norm
/// interpolant sum_i alpha_i k(., knot_i). Manifest "values" are the
/// interpolant's values at the knots; "sampled" keeps the raw draw.
GroundTruth sample_gp_instance(Rng& rng, const KernelSpec& kernel, int n_knots, const Box& domain,
                               const GpSampleOptions& options = {});

/// Default knot counts: 50 in 1-D, 150 in 2-D.
int default_knot_count(int dim);

/// Names accepted by test_function.
const std::vector<std::string>& test_function_names();

/// Un-normalized closed form (minimization convention) on its standard domain.
double raw_test_function(const std::string& name, const Point& x);
Box test_function_domain(const std::string& name);

/// -raw / std(raw over a 100 x 100 grid), maximized. The engine kernel is SE with
/// unit variance and a lengthscale fitted by GP marginal likelihood on random
/// samples; B = 6.
GroundTruth test_function(const std::string& name);

/// Smooth 2-D stand-in for a thermal-comfort objective: two SE bumps over
/// temperature (degC) x air speed (m/s).
GroundTruth comfort_synth();

/// Lengthscale maximizing the GP log marginal likelihood (unit variance, small
/// noise) of `samples` random evaluations of f, searched on a log grid.
double fit_lengthscale(const std::function<double(const Point&)>& f, const Box& domain, Rng& rng,
                       int samples = 100);

/// Named instance for the CLI: "gp-se", "gp-se-2d", a test function name or
/// "comfort_synth". GP instances use `seed` (its "instance" sub-stream).
GroundTruth make_instance(const std::string& name, std::uint64_t seed);
bool is_known_instance(const std::string& name);

/// Rebuilds an instance from its manifest (bit-identical evaluations).
GroundTruth truth_from_manifest(const nlohmann::json& manifest);

/// Simulated comparison oracle: Bernoulli(btl_prob(f(x), f(x'))).
class ComparisonOracle {
 public:
  ComparisonOracle(GroundTruth truth, Rng rng);
  /// 1 when x is preferred. Throws InputError for points outside the domain.
  int compare(const Point& x, const Point& x_prime);
  const GroundTruth& truth() const { return truth_; }

 private:
  GroundTruth truth_;
  Rng rng_;
};

ComparisonOracle oracle_from_truth(const GroundTruth& truth, Rng rng);

}  // namespace popbo

#endif
