#ifndef POPBO_SOLVER_HPP
#define POPBO_SOLVER_HPP

#include "popbo/kernel.hpp"
#include "popbo/likelihood.hpp"
#include "popbo/types.hpp"

#include <Eigen/Cholesky>

#include <vector>

namespace popbo {

struct SolverOptions {
  double opt_tol = 1e-6;   // relative objective accuracy (duality gap)
  double feas_tol = 1e-6;  // allowed violation of either constraint
  int max_iterations = 500;  // Newton iterations, summed over multiplier updates
  int max_multiplier_steps = 60;
};

struct SolveReport {
  Vector argmax;
  double objective = 0.0;
  int iterations = 0;
  double constraint_slack = 0.0;  // min over the problem's constraints, >= -feas_tol when feasible
  bool converged = false;
  double multiplier = 0.0;  // Lagrange multiplier of the binding constraint (warm-start hint)
};

/// Finite-dimensional view of a chained history: values Z = (z_0..z_t) at
/// x_0..x_t, the jittered Gram K + eps I = L L^T, and the whitened coordinates
/// w = L^{-1} Z in which the RKHS-ball constraint Z^T (K + eps I)^{-1} Z <= B^2
/// becomes |w| <= B.
class DuelModel {
 public:
  DuelModel(const History& history, const KernelSpec& kernel, double norm_bound, double jitter);

  const KernelSpec& kernel() const { return kernel_; }
  double norm_bound() const { return norm_bound_; }
  double jitter() const { return jitter_; }
  const PointList& points() const { return points_; }
  const std::vector<int>& outcomes() const { return outcomes_; }
  Eigen::Index size() const { return l_.rows(); }  // t + 1
  const Matrix& lower() const { return l_; }
  /// Row tau of (difference operator) * L: maps w to z_tau - z_{tau-1}.
  const Matrix& diff_lower() const { return m_; }

  Vector values(const Vector& w) const { return l_ * w; }
  Vector whiten(const Vector& z) const;
  /// Z^T (K + eps I)^{-1} Z.
  double rkhs_norm_sq(const Vector& z) const;

  double loglik_whitened(const Vector& w) const;
  /// Gradient of w -> loglik(L w) and the per-duel curvature sigma'(u_tau).
  Vector grad_whitened(const Vector& w, Vector* curvature = nullptr) const;

 private:
  KernelSpec kernel_;
  double norm_bound_;
  double jitter_;
  PointList points_;
  std::vector<int> outcomes_;
  Matrix l_;
  Matrix m_;
};

/// Maximum-likelihood values over the RKHS ball. Without a history returns Z = (0).
/// `warm_values`, when given, is the previous step's solution (length t);
/// it is padded with its last entry.
SolveReport solve_mle(const DuelModel& model, const SolverOptions& options = {},
                      const Vector* warm_values = nullptr, double warm_multiplier = 0.0);

SolveReport solve_mle(const History& history, const KernelSpec& kernel, double norm_bound, double jitter,
                      const SolverOptions& options = {});

/// Primal-dual state of an optimistic-advantage solve, reusable as a start
/// for a neighbouring candidate.
struct AdvantageHint {
  Vector w;
  double mu = 0.0;
  double nu = 0.0;
  bool valid = false;
};

/// The likelihood-ratio confidence set {f : |f| <= B, l(f) >= l_mle - beta1} for a
/// fixed history, with the MLE cached so the optimistic advantage at many
/// candidate points can be evaluated concurrently (all methods are const).
class ConfidenceSet {
 public:
  ConfidenceSet(DuelModel model, SolveReport mle, double beta1, SolverOptions options = {});

  const DuelModel& model() const { return model_; }
  const SolveReport& mle() const { return mle_; }
  double beta1() const { return beta1_; }
  double level() const { return level_; }

  /// max z - z_t over (Z, z) with [Z; z] in the bordered ball and l(Z) >= level.
  /// argmax holds (z_0..z_t, z).
  /// `hint`, when given, seeds the solve with a nearby candidate's multipliers
  /// and receives this solve's.
  SolveReport optimistic_advantage(const Point& x, AdvantageHint* hint = nullptr) const;

  /// Closed-form value without the likelihood constraint: B sqrt(|d|^2 + s).
  /// Upper-bounds optimistic_advantage(x).
  double unconstrained_advantage(const Point& x) const;

 private:
  struct Border {
    Vector a;      // L^{-1} k_x
    Vector d;      // a - L^T e_t
    double schur;  // k(x,x) + eps - |a|^2
  };
  Border border(const Point& x) const;
  SolveReport finish(const Border& b, const Vector& w, int iterations, bool converged, double multiplier) const;

  struct KktPoint {
    Vector w;
    double mu;
    double nu;
  };
  struct KktOutcome {
    Vector w;  // feasible, certified when converged
    int iterations = 0;
    bool converged = false;
  };
  template <class Repair, class Primal>
  KktOutcome kkt_newton(const Border& b, KktPoint& k, double tol, const Repair& repair, const Primal& primal) const;

  DuelModel model_;
  SolveReport mle_;
  Vector w_mle_;
  double beta1_;
  double level_;
  SolverOptions options_;
};

/// Standalone form: solves the MLE internally for the feasible start and
/// uses the caller's ell_mle for the likelihood level.
SolveReport solve_acquisition_inner(const Point& x, const History& history, const KernelSpec& kernel,
                                    double norm_bound, double beta1, double ell_mle, double jitter,
                                    const SolverOptions& options = {});

/// Minimum-norm interpolant through (points_i, values_i) with jittered Gram.
class Interpolant {
 public:
  Interpolant(const KernelSpec& kernel, PointList points, const Vector& values, double jitter);
  double operator()(const Point& x) const;
  const Vector& weights() const { return alpha_; }
  /// values^T (K + eps I)^{-1} values.
  double norm_sq() const { return norm_sq_; }

 private:
  KernelSpec kernel_;
  PointList points_;
  Vector alpha_;
  double norm_sq_;
};

}  // namespace popbo

#endif
