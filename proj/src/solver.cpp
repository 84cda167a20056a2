#include "popbo/solver.hpp"

#include "popbo/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace popbo {

namespace {

constexpr double kMinMultiplier = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

double decrement_tol(double f) { return 1e-13 * (1.0 + std::abs(f)); }

// Lower triangle of M^T diag(c) M.
Matrix weighted_gram(const Matrix& m, const Vector& c) {
  const Eigen::Index n = m.cols();
  Matrix a = Matrix::Zero(n, n);
  if (m.rows() == 0) return a;
  const Matrix scaled = c.cwiseSqrt().asDiagonal() * m;
  a.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
  return a;
}

void factorize(Eigen::LLT<Matrix>& llt, Matrix& a) {
  llt.compute(a);
  // Round-off can cost definiteness when the curvature is tiny; nudge and retry.
  double bump = 1e-14 * (1.0 + a.diagonal().cwiseAbs().maxCoeff());
  while (llt.info() != Eigen::Success) {
    if (a.hasNaN()) throw NumericalError("Newton system contains NaN");
    a.diagonal().array() += bump;
    bump *= 10.0;
    if (bump > 1e6 * (1.0 + a.diagonal().cwiseAbs().maxCoeff())) throw NumericalError("Newton system is not positive definite");
    llt.compute(a);
  }
}

// Safeguarded next multiplier inside (lo, hi).
double next_multiplier(double proposal, double current, double lo, double hi) {
  if (std::isfinite(proposal) && proposal > lo && proposal < hi) return proposal;
  if (std::isfinite(hi)) return lo > 0 ? std::sqrt(lo * hi) : hi * 0.1;
  return std::max(current, 1.0) * 10.0;
}

// Ball subproblem shared by the MLE and the optimistic advantage:
//   max  d^T w + rs * omega + nu * loglik(Lw)   s.t.  |w|^2 + omega^2 <= B^2.
// For a multiplier mu > 0 the Lagrangian maximizer has omega = rs / mu and w
// solving d + nu grad - mu w = 0; mu is then fixed by the sphere condition.
struct Ball {
  const DuelModel& model;
  const Vector* d;  // null means zero
  double rs;
  double nu;
};

struct BallState {
  Vector w;
  double mu = 1.0;
  double omega = 0.0;
  double gap = kInf;  // duality gap of the ball subproblem at (w, omega)
  bool converged = false;
  Eigen::LLT<Matrix> llt;  // factor of nu M^T C M + mu I at w
  Vector grad_ll;          // gradient of loglik at w
};

double ball_primal(const Ball& p, const Vector& w, double omega) {
  return (p.d ? p.d->dot(w) : 0.0) + p.rs * omega + p.nu * p.model.loglik_whitened(w);
}

// Newton ascent on psi(w) = d^T w + nu loglik(Lw) - mu/2 |w|^2.
int ball_newton(const Ball& p, double mu, BallState& s, int budget, bool& converged) {
  const Eigen::Index n = s.w.size();
  auto psi = [&](const Vector& v) {
    return (p.d ? p.d->dot(v) : 0.0) + p.nu * p.model.loglik_whitened(v) - 0.5 * mu * v.squaredNorm();
  };
  converged = false;
  int it = 0;
  double f = psi(s.w);
  for (;;) {
    Vector curv;
    s.grad_ll = p.model.grad_whitened(s.w, &curv);
    Vector grad = p.nu * s.grad_ll - mu * s.w;
    if (p.d) grad += *p.d;
    Matrix a = weighted_gram(p.model.diff_lower(), p.nu * curv);
    a.diagonal().array() += mu;
    factorize(s.llt, a);
    if (it >= budget) break;
    const Vector step_dir = s.llt.solve(grad);
    const double dec = grad.dot(step_dir);
    if (dec <= decrement_tol(f)) {
      // The full step is still taken: callers read derived quantities off w
      // that are far more sensitive than psi.
      s.w += step_dir;
      converged = true;
      break;
    }
    ++it;
    double t = 1.0;
    Vector wn(n);
    double fn = f;
    for (int k = 0; k < 60; ++k) {
      wn = s.w + t * step_dir;
      fn = psi(wn);
      if (fn >= f + 0.25 * t * dec) break;
      t *= 0.5;
    }
    if (!(fn >= f)) {  // no ascent possible at working precision
      converged = dec <= 1e-9 * (1.0 + std::abs(f));
      break;
    }
    s.w = wn;
    f = fn;
  }
  return it;
}

// Solves the ball subproblem by a safeguarded Newton iteration on
// 1/|v(mu)| - 1/B, warm-started from s. Returns Newton iterations used.
int solve_ball(const Ball& p, BallState& s, double tol, int max_steps, int budget) {
  const double bound = p.model.norm_bound();
  const double bound_sq = bound * bound;
  double lo = 0.0, hi = kInf;
  double mu = s.mu > kMinMultiplier ? s.mu : 1.0;
  int used = 0;
  s.converged = false;
  BallState best;
  double best_lower = -kInf, best_upper = kInf;
  for (int step = 0; step < max_steps; ++step) {
    bool newton_ok = false;
    used += ball_newton(p, mu, s, std::max(budget - used, 0), newton_ok);
    const double omega = p.rs / mu;
    const double nsq = s.w.squaredNorm() + omega * omega;
    s.mu = mu;
    s.omega = omega;
    // Weak duality: the Lagrangian value bounds the subproblem from above for
    // any mu; the iterate pulled onto the ball gives a feasible lower bound.
    if (newton_ok) best_upper = std::min(best_upper, ball_primal(p, s.w, omega) + 0.5 * mu * (bound_sq - nsq));
    BallState cand = s;
    if (nsq > bound_sq) {
      const double scale = bound / std::sqrt(nsq);
      cand.w *= scale;
      cand.omega *= scale;
    }
    const double lower = ball_primal(p, cand.w, cand.omega);
    if (lower > best_lower) {
      best_lower = lower;
      best = std::move(cand);
    }
    best.gap = std::max(best_upper - best_lower, 0.0);
    if (best.gap <= tol * (1.0 + std::abs(best_lower)) || (newton_ok && nsq <= bound_sq && mu <= kMinMultiplier)) {
      best.converged = true;
      s = std::move(best);
      return used;
    }
    if (nsq <= bound_sq) hi = mu;
    else lo = mu;
    if (used >= budget) break;
    const double n_norm = std::sqrt(nsq);
    const Vector aw = s.llt.solve(s.w);
    const double dphi = (s.w.dot(aw) + p.rs * p.rs / (mu * mu * mu)) / (nsq * n_norm);
    const double proposal = mu - (1.0 / n_norm - 1.0 / bound) / dphi;
    const double next = next_multiplier(proposal, mu, lo, hi);
    if (next == mu) break;
    mu = std::max(next, kMinMultiplier);
  }
  if (best_lower > -kInf) {
    s = std::move(best);
  } else {
    const double nsq = s.w.squaredNorm() + s.omega * s.omega;
    if (nsq > bound_sq) {
      const double scale = bound / std::sqrt(nsq);
      s.w *= scale;
      s.omega *= scale;
    }
  }
  return used;
}

}  // namespace

DuelModel::DuelModel(const History& history, const KernelSpec& kernel, double norm_bound, double jitter)
    : kernel_(kernel), norm_bound_(norm_bound), jitter_(jitter), points_(history.points()),
      outcomes_(history.outcomes()) {
  if (!(norm_bound > 0)) throw InputError("norm bound must be positive");
  kernel_.validate();
  const auto llt = cholesky(gram(kernel_, points_, jitter_));
  l_ = llt.matrixL();
  const Eigen::Index t = static_cast<Eigen::Index>(outcomes_.size());
  m_.resize(t, l_.cols());
  for (Eigen::Index tau = 1; tau <= t; ++tau) m_.row(tau - 1) = l_.row(tau) - l_.row(tau - 1);
}

Vector DuelModel::whiten(const Vector& z) const { return l_.triangularView<Eigen::Lower>().solve(z); }

double DuelModel::rkhs_norm_sq(const Vector& z) const { return whiten(z).squaredNorm(); }

double DuelModel::loglik_whitened(const Vector& w) const {
  if (m_.rows() == 0) return 0.0;
  const Vector u = m_ * w;
  double total = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) total += log_logistic(outcomes_[i] == 1 ? u[i] : -u[i]);
  return total;
}

Vector DuelModel::grad_whitened(const Vector& w, Vector* curvature) const {
  if (m_.rows() == 0) {
    if (curvature) curvature->resize(0);
    return Vector::Zero(w.size());
  }
  const Vector u = m_ * w;
  Vector r(u.size());
  if (curvature) curvature->resize(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double p = logistic(u[i]);
    r[i] = outcomes_[i] - p;
    if (curvature) (*curvature)[i] = p * logistic(-u[i]);
  }
  return m_.transpose() * r;
}

SolveReport solve_mle(const DuelModel& model, const SolverOptions& options, const Vector* warm_values,
                      double warm_multiplier) {
  const Eigen::Index n = model.size();
  const double bound_sq = model.norm_bound() * model.norm_bound();
  SolveReport report;
  if (n == 1) {
    report.argmax = Vector::Zero(1);
    report.converged = true;
    report.constraint_slack = bound_sq;
    return report;
  }
  BallState s;
  s.w = Vector::Zero(n);
  if (warm_values && warm_values->size() == n - 1) {
    Vector z(n);
    z.head(n - 1) = *warm_values;
    z[n - 1] = (*warm_values)[n - 2];
    s.w = model.whiten(z);
  }
  s.mu = warm_multiplier > kMinMultiplier ? warm_multiplier : 1.0;
  const Ball p{model, nullptr, 0.0, 1.0};
  const int used = solve_ball(p, s, 0.1 * options.opt_tol, options.max_multiplier_steps, options.max_iterations);
  report.argmax = model.values(s.w);
  report.objective = model.loglik_whitened(s.w);
  report.iterations = used;
  report.constraint_slack = bound_sq - s.w.squaredNorm();
  report.converged = s.converged;
  report.multiplier = s.mu;
  return report;
}

SolveReport solve_mle(const History& history, const KernelSpec& kernel, double norm_bound, double jitter,
                      const SolverOptions& options) {
  return solve_mle(DuelModel(history, kernel, norm_bound, jitter), options);
}

ConfidenceSet::ConfidenceSet(DuelModel model, SolveReport mle, double beta1, SolverOptions options)
    : model_(std::move(model)), mle_(std::move(mle)), beta1_(beta1), options_(options) {
  if (!(beta1 >= 0)) throw InputError("beta1 must be non-negative");
  if (mle_.argmax.size() != model_.size()) throw InputError("MLE solution does not match the history");
  w_mle_ = model_.whiten(mle_.argmax);
  const double rho = w_mle_.norm();
  if (rho > model_.norm_bound()) w_mle_ *= model_.norm_bound() / rho;
  level_ = mle_.objective - beta1_;
  if (model_.loglik_whitened(w_mle_) < level_ - options_.feas_tol)
    throw NumericalError("likelihood level exceeds the value attained by the MLE solution");
}

ConfidenceSet::Border ConfidenceSet::border(const Point& x) const {
  const auto& kernel = model_.kernel();
  const Vector kx = kernel_column(kernel, model_.points(), x);
  Border b;
  b.a = model_.lower().triangularView<Eigen::Lower>().solve(kx);
  b.d = b.a - model_.lower().row(model_.size() - 1).transpose();
  const double kxx = eval_kernel(kernel, x, x) + model_.jitter();
  b.schur = std::max(kxx - b.a.squaredNorm(), 1e-14 * (1.0 + std::abs(kxx)));
  return b;
}

double ConfidenceSet::unconstrained_advantage(const Point& x) const {
  const Border b = border(x);
  return model_.norm_bound() * std::sqrt(b.d.squaredNorm() + b.schur);
}

SolveReport ConfidenceSet::finish(const Border& b, const Vector& w, int iterations, bool converged,
                                  double multiplier) const {
  const double bound = model_.norm_bound();
  const double r = std::sqrt(std::max(bound * bound - w.squaredNorm(), 0.0));
  const double rs = std::sqrt(b.schur);
  const Eigen::Index n = model_.size();
  SolveReport rep;
  rep.argmax.resize(n + 1);
  rep.argmax.head(n) = model_.values(w);
  rep.argmax[n] = b.a.dot(w) + rs * r;
  rep.objective = b.d.dot(w) + rs * r;
  rep.iterations = iterations;
  const double ball_slack = bound * bound - (w.squaredNorm() + r * r);
  rep.constraint_slack = std::min(ball_slack, model_.loglik_whitened(w) - level_);
  rep.converged = converged;
  rep.multiplier = multiplier;
  return rep;
}

// Newton on the optimality system of the level-constrained ball problem
//   d + nu grad - mu w = 0,   |w|^2 + (rs/mu)^2 = B^2,   loglik(w) = level.
// Every iterate with mu > 0, nu >= 0 certifies an upper bound: the Lagrangian is
// mu-strongly concave in w, so its supremum exceeds its value by at most
// |r1|^2 / (2 mu). Returns unconverged when the merit stalls.
template <class Repair, class Primal>
ConfidenceSet::KktOutcome ConfidenceSet::kkt_newton(const Border& b, KktPoint& k, double tol, const Repair& repair,
                                                    const Primal& primal) const {
  constexpr int kMaxIterations = 40;
  const double bound = model_.norm_bound();
  const double bound_sq = bound * bound;
  const double rs2 = b.schur;
  KktOutcome out;
  if (!(k.mu > 0) || !(k.nu >= 0)) return out;

  struct Eval {
    Vector grad, curv, r1;
    double r2 = 0, r3 = 0, merit = 0;
  };
  auto evaluate = [&](const Vector& w, double mu, double nu, Eval& e) {
    e.grad = model_.grad_whitened(w, &e.curv);
    e.r1 = b.d + nu * e.grad - mu * w;
    e.r2 = 0.5 * (bound_sq - w.squaredNorm() - rs2 / (mu * mu));
    e.r3 = model_.loglik_whitened(w) - level_;
    e.merit = e.r1.squaredNorm() + e.r2 * e.r2 + e.r3 * e.r3;
  };

  double upper = kInf, lower = -kInf;
  Eval e;
  evaluate(k.w, k.mu, k.nu, e);
  Eigen::LLT<Matrix> llt;
  for (int it = 0;; ++it) {
    upper = std::min(upper, b.d.dot(k.w) + rs2 / k.mu + k.nu * e.r3 + k.mu * e.r2 + e.r1.squaredNorm() / (2 * k.mu));
    Vector wf = k.w;
    const double norm = wf.norm();
    if (norm > bound) wf *= bound / norm;
    wf = repair(wf, model_.loglik_whitened(wf));
    if (const double v = primal(wf); v > lower) {
      lower = v;
      out.w = std::move(wf);
    }
    out.iterations = it;
    if (upper - lower <= tol * (1.0 + std::abs(lower))) {
      out.converged = true;
      return out;
    }
    if (it >= kMaxIterations) return out;

    Matrix a = weighted_gram(model_.diff_lower(), k.nu * e.curv);
    a.diagonal().array() += k.mu;
    try {
      factorize(llt, a);
    } catch (const NumericalError&) {
      return out;
    }
    const Vector p = llt.solve(e.r1);
    const Vector aw = llt.solve(k.w);
    const Vector ag = llt.solve(e.grad);
    const double a11 = k.w.dot(aw) + rs2 / (k.mu * k.mu * k.mu);
    const double a12 = -k.w.dot(ag);
    const double a22 = e.grad.dot(ag);
    const double b1 = -e.r2 + k.w.dot(p);
    const double b2 = -e.r3 - e.grad.dot(p);
    const double det = a11 * a22 - a12 * a12;
    if (!(det > 0)) return out;
    const double dmu = (b1 * a22 - a12 * b2) / det;
    const double dnu = (a11 * b2 - a12 * b1) / det;
    const Vector dw = p - aw * dmu + ag * dnu;

    double step = 1.0;
    if (dmu < 0) step = std::min(step, 0.9 * k.mu / -dmu);
    if (dnu < 0) step = std::min(step, 0.9 * k.nu / -dnu);
    Eval trial;
    bool accepted = false;
    for (int h = 0; h < 30; ++h, step *= 0.5) {
      const Vector w = k.w + step * dw;
      const double mu = k.mu + step * dmu;
      const double nu = k.nu + step * dnu;
      evaluate(w, mu, nu, trial);
      if (trial.merit <= (1.0 - 1e-4 * step) * e.merit) {
        k = {w, mu, nu};
        e = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) return out;
  }
}

// In whitened coordinates the bordered ball constraint reads |w|^2 + omega^2 <= B^2
// with z = a^T w + sqrt(s) omega, so the advantage z - z_t is d^T w + sqrt(s) omega.
// The likelihood constraint is handled through its Lagrangian dual in nu; each
// dual evaluation is a ball subproblem.
SolveReport ConfidenceSet::optimistic_advantage(const Point& x, AdvantageHint* hint) const {
  const Border b = border(x);
  const double bound = model_.norm_bound();
  const double rs = std::sqrt(b.schur);

  const double cnorm = std::sqrt(b.d.squaredNorm() + b.schur);
  const Vector w0 = b.d * (bound / cnorm);
  if (model_.loglik_whitened(w0) >= level_) return finish(b, w0, 0, true, 0.0);
  if (beta1_ <= 1e-12) return finish(b, w_mle_, 0, true, kInf);

  const double ll_mle = model_.loglik_whitened(w_mle_);
  const double tol = 0.1 * options_.opt_tol;
  auto primal = [&](const Vector& w) {
    return b.d.dot(w) + rs * std::sqrt(std::max(bound * bound - w.squaredNorm(), 0.0));
  };
  // Feasible point from an iterate that misses the level: move toward the MLE.
  auto repair = [&](const Vector& w, double ll) -> Vector {
    if (ll >= level_) return w;
    const double lam = std::min(1.0, (level_ - ll) / std::max(ll_mle - ll, 1e-300) * (1.0 + 1e-9));
    return (1.0 - lam) * w + lam * w_mle_;
  };

  const double mu0 = cnorm / bound + std::max(mle_.multiplier, 0.0);
  if (hint && hint->valid && hint->w.size() == w_mle_.size()) {
    KktPoint k{hint->w, hint->mu, hint->nu};
    const KktOutcome out = kkt_newton(b, k, tol, repair, primal);
    if (out.converged) {
      if (hint) *hint = {out.w, k.mu, k.nu, true};
      return finish(b, out.w, out.iterations, true, k.nu);
    }
  }

  BallState s;
  s.w = w_mle_;
  s.mu = mu0;
  double nu = 1.0;
  double lo = 0.0, hi = kInf;
  double lower = -kInf, upper = kInf, best_nu = 0.0;
  Vector best;
  int used = 0;
  bool converged = false;

  for (int step = 0; step < options_.max_multiplier_steps && used < options_.max_iterations; ++step) {
    const Ball p{model_, &b.d, rs, nu};
    // g(nu) is read off w, so w must be far more accurate than the objective.
    used += solve_ball(p, s, 1e-12, options_.max_multiplier_steps, options_.max_iterations - used);
    const double ll = model_.loglik_whitened(s.w);
    const double g = ll - level_;
    if (s.converged) upper = std::min(upper, b.d.dot(s.w) + rs * s.omega + nu * g + s.gap);
    const Vector feasible = repair(s.w, ll);
    const double value = primal(feasible);
    if (value > lower) {
      lower = value;
      best = feasible;
      best_nu = nu;
    }
    if (upper - lower <= tol * (1.0 + std::abs(lower))) {
      converged = true;
      break;
    }
    if (g >= 0) hi = nu;
    else lo = nu;
    if (std::isfinite(hi) && hi - lo <= 1e-14 * hi) break;
    // Newton step on g(nu); the sphere condition couples mu to nu.
    const Vector ag = s.llt.solve(s.grad_ll);
    const Vector aw = s.llt.solve(s.w);
    const double ww = s.w.dot(aw) + rs * rs / (s.mu * s.mu * s.mu);
    const double wg = s.w.dot(ag);
    const double slope = s.grad_ll.dot(ag) - wg * wg / ww;
    nu = next_multiplier(nu - g / slope, nu, lo, hi);
  }
  if (hint) *hint = {s.w, s.mu, best_nu, converged};
  return finish(b, best, used, converged, best_nu);
}

SolveReport solve_acquisition_inner(const Point& x, const History& history, const KernelSpec& kernel,
                                    double norm_bound, double beta1, double ell_mle, double jitter,
                                    const SolverOptions& options) {
  DuelModel model(history, kernel, norm_bound, jitter);
  SolveReport mle = solve_mle(model, options);
  if (ell_mle > mle.objective + options.feas_tol)
    throw NumericalError("supplied MLE value exceeds the attainable maximum; confidence set is empty");
  mle.objective = ell_mle;
  return ConfidenceSet(std::move(model), std::move(mle), beta1, options).optimistic_advantage(x);
}

Interpolant::Interpolant(const KernelSpec& kernel, PointList points, const Vector& values, double jitter)
    : kernel_(kernel), points_(std::move(points)) {
  if (static_cast<std::size_t>(values.size()) != points_.size())
    throw InputError("interpolant needs one value per point");
  const auto llt = cholesky(gram(kernel_, points_, jitter));
  alpha_ = llt.solve(values);
  norm_sq_ = values.dot(alpha_);
}

double Interpolant::operator()(const Point& x) const { return kernel_column(kernel_, points_, x).dot(alpha_); }

}  // namespace popbo
