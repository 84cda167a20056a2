#ifndef POPBO_SESSION_HPP
#define POPBO_SESSION_HPP

#include "popbo/acquisition.hpp"
#include "popbo/kernel.hpp"
#include "popbo/likelihood.hpp"
#include "popbo/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace popbo {

/// Display metadata for one input dimension ("Temperature", "°C").
struct DimensionLabel {
  std::string name;
  std::string unit;
};

struct PopBoConfig {
  KernelSpec kernel;
  Box domain;
  double norm_bound = 1.0;
  double beta0 = 1.0;
  double lambda = 1.0;
  double jitter = 1e-6;
  Point x0;
  OuterSearchOptions search;
  std::uint64_t seed = 0;
  bool adapt_norm_bound = false;
  double guard_factor = 1.5;
  std::vector<DimensionLabel> labels;
  SolverOptions solver;

  /// Throws InputError on inconsistent dimensions, non-positive scalars or x0 outside the domain.
  void validate() const;
};

void to_json(nlohmann::json& j, const PopBoConfig& c);
void from_json(const nlohmann::json& j, PopBoConfig& c);

/// Confidence width schedule beta0 * sqrt(t), t >= 1.
double beta1(std::size_t t, double beta0);

/// 1-based position of the smallest radius, ties to the earliest; throws
/// InputError on an empty sequence.
std::size_t t_star_index(std::span<const double> radii);

/// Duel proposed at step t and not yet answered.
struct PendingQuery {
  Point x;
  Point x_prime;
  double advantage = 0.0;
  double sigma = 0.0;   // duel-wise uncertainty given the duels before this step
  double radius = 0.0;  // 2 (2B + sqrt(beta/lambda)) sigma
  double beta = 0.0;
};

struct ReportedSolution {
  std::size_t t_star = 0;  // 1-based step index
  Point x;
  double radius = 0.0;
};

/// One optimization run. Single-writer: next_query/observe must not run
/// concurrently on the same object; const accessors are safe between them.
class Session {
 public:
  explicit Session(PopBoConfig config, Execution exec = Execution::Parallel);

  const PopBoConfig& config() const { return config_; }
  const History& history() const { return history_; }
  /// Number of answered duels.
  std::size_t step() const { return history_.size(); }
  double norm_bound() const { return bound_; }
  const SolveReport& mle() const { return mle_; }
  const std::optional<PendingQuery>& pending() const { return pending_; }
  std::size_t doublings() const { return doublings_; }

  // Per answered step tau = 1..t.
  const std::vector<double>& sigma_trace() const { return sigma_trace_; }
  const std::vector<double>& radius_trace() const { return radius_trace_; }
  const std::vector<double>& advantage_trace() const { return advantage_trace_; }
  const std::vector<double>& norm_bound_trace() const { return bound_trace_; }

  /// Proposes (x_t, x_{t-1}); throws ProtocolError if a duel is already pending.
  Duel next_query();

  /// Records the answer to the pending duel (1: x_t preferred) and refits the MLE.
  void observe(int pref);

  /// Step with the smallest recorded report radius (ties: earliest).
  ReportedSolution report_t_star() const;

  /// Maximizer of the minimum-norm interpolant through the MLE values; x0 when t = 0.
  Point report_max_mle() const;
  Point report_max_mle(const OuterSearchOptions& search) const;

  /// Likelihood-ratio check of the norm bound: doubles B when fitting in the
  /// ball of radius 2B gains more than guard_factor * beta1(t) log-likelihood.
  bool adapt_norm_bound();

  /// Confidence set at the current history with width beta1(t + 1).
  ConfidenceSet confidence_set() const;

  nlohmann::json checkpoint() const;
  /// Rebuilds a session by replaying the recorded answers; throws ProtocolError
  /// if the replay does not reproduce the stored queries and traces exactly.
  static Session restore(const nlohmann::json& checkpoint, Execution exec = Execution::Parallel);

  /// Per-step trace for reporting and the UI.
  nlohmann::json trace_json() const;

 private:
  void refit(const Vector* warm, double warm_multiplier);

  PopBoConfig config_;
  Execution exec_;
  History history_;
  double bound_;
  std::optional<DuelModel> model_;
  SolveReport mle_;
  std::optional<PendingQuery> pending_;
  std::vector<double> sigma_trace_;
  std::vector<double> radius_trace_;
  std::vector<double> advantage_trace_;
  std::vector<double> bound_trace_;
  std::vector<double> beta_trace_;
  std::size_t doublings_ = 0;
};

/// Maximizes a cheap function over the domain: grid for d <= 2, otherwise
/// Latin-hypercube starts with coordinate refinement.
Point maximize_over_domain(const Box& domain, const std::function<double(const Point&)>& f,
                           const OuterSearchOptions& search, Rng& rng);

}  // namespace popbo

#endif
