#ifndef POPBO_BENCH_HPP
#define POPBO_BENCH_HPP

#include "popbo/instances.hpp"
#include "popbo/session.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace popbo {

struct EpisodeStep {
  std::size_t t = 0;
  Point x;
  double regret = 0.0;
  double cum_regret = 0.0;
  double report_radius = 0.0;  // radius of this step's duel
  std::size_t t_star = 0;
  double report_subopt = 0.0;  // regret of x_{t*}
  double mle_subopt = 0.0;     // regret of the max-MLE report
  double truth_loglik = 0.0;   // log-likelihood of the truth's values at x_0..x_t
  double mle_loglik = 0.0;
  double norm_bound = 0.0;
};

struct EpisodeTrace {
  std::string instance;
  std::uint64_t seed = 0;
  std::string config_hash;
  double beta0 = 1.0;
  std::vector<EpisodeStep> steps;
  double wall_seconds = 0.0;  // not part of the CSV so traces stay byte-identical
};

/// Solver or protocol failure in the middle of an episode; carries the steps completed so far.
class EpisodeFailure : public std::runtime_error {
 public:
  EpisodeFailure(const std::string& what, EpisodeTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const EpisodeTrace& partial() const { return partial_; }

 private:
  EpisodeTrace partial_;
};

struct EpisodeOptions {
  bool track_max_mle = true;  // max-MLE report each step (costs one interpolant sweep per step)
};

/// Runs `horizon` steps of the engine against a simulated oracle drawn from `rng`.
EpisodeTrace run_episode(const PopBoConfig& config, const GroundTruth& truth, std::size_t horizon, Rng& rng,
                         Execution exec = Execution::Parallel, const EpisodeOptions& options = {});

std::vector<double> cumulative_regret(const EpisodeTrace& trace);
std::vector<double> cumulative_sum(const std::vector<double>& values);

/// Least-squares slope of log R_t against log t over t > burn_in (t is 1-based).
double loglog_slope(const std::vector<double>& curve, std::size_t burn_in = 5);

struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> std;  // sample standard deviation (n - 1); 0 for a single run
};

SeriesStats series_stats(const std::vector<std::vector<double>>& runs);

struct Summary {
  std::size_t runs = 0;
  std::size_t horizon = 0;
  SeriesStats regret;
  SeriesStats cum_regret;
  SeriesStats report_subopt;
  SeriesStats mle_subopt;
  double slope = 0.0;  // loglog_slope of the mean cumulative-regret curve
  std::size_t burn_in = 5;
};

/// Per-step mean/std; throws InputError on an empty set or unequal horizons.
Summary aggregate(const std::vector<EpisodeTrace>& traces, std::size_t burn_in = 5);

nlohmann::json summary_to_json(const Summary& s);

/// CSV with columns t, x1..xd, regret, cum_regret, report_radius, t_star,
/// report_subopt, mle_subopt, truth_loglik, mle_loglik, norm_bound.
std::string episode_csv(const EpisodeTrace& trace);

/// Per-step mean/std curves for plotting.
std::string curves_csv(const Summary& s);

struct BenchSpec {
  std::string instance = "gp-se";
  std::uint64_t base_seed = 0;
  std::size_t seeds = 30;
  std::size_t horizon = 30;
  double beta0 = 1.0;
  double lambda = 1.0;
  double jitter = 1e-6;
  std::optional<double> norm_bound;  // default: the instance's recommendation
  std::optional<KernelSpec> kernel;  // default: the instance's kernel
  OuterSearchOptions search;
  std::size_t burn_in = 5;
  bool adapt_norm_bound = false;
  EpisodeOptions episode;
};

void to_json(nlohmann::json& j, const BenchSpec& s);

/// Engine configuration for one episode: instance kernel and B unless
/// overridden, seed = episode seed, x0 drawn from the candidate grid.
PopBoConfig episode_config(const BenchSpec& spec, const GroundTruth& truth, std::uint64_t seed);

struct BenchResult {
  std::vector<EpisodeTrace> traces;         // completed episodes, in seed order
  std::vector<EpisodeTrace> failed;         // partial traces of failed episodes
  std::vector<std::string> errors;
  std::vector<nlohmann::json> manifests;    // instance manifest per seed
  std::vector<nlohmann::json> configs;      // engine config per seed
  Summary summary;                          // over completed traces (empty if none)
  double wall_seconds = 0.0;
};

/// Episodes seed = base_seed + i, i < seeds. Parallel runs episodes on OpenMP
/// threads; results are identical to the serial run.
BenchResult run_bench(const BenchSpec& spec, Execution exec = Execution::Parallel);

/// Writes runs/<run_id>/{episode_<seed>.csv, summary.json, manifest.json, curves.csv}
/// under out_dir and returns the run directory.
std::filesystem::path write_bench_outputs(const std::filesystem::path& out_dir, const std::string& run_id,
                                          const BenchSpec& spec, const BenchResult& result);

/// FNV-1a of the config's canonical JSON, as 16 hex digits.
std::string config_hash(const PopBoConfig& config);

}  // namespace popbo

#endif
