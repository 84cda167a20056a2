#include "popbo/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

namespace popbo {

Box::Box(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.size() == 0)
    throw InputError("box bounds must be non-empty and of equal dimension");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw InputError("box lower bound exceeds upper bound");
}

Box Box::uniform(int dim, double lo, double hi) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Box::contains(const Point& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
  return true;
}

Point Box::clamp(const Point& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Linear: return "linear";
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Matern: return "matern";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "linear") return KernelFamily::Linear;
  if (name == "se" || name == "squared-exponential" || name == "rbf") return KernelFamily::SquaredExponential;
  if (name == "matern") return KernelFamily::Matern;
  throw InputError("unknown kernel family: " + name);
}

KernelSpec KernelSpec::linear(int dim) {
  KernelSpec s;
  s.family = KernelFamily::Linear;
  s.dim = dim;
  return s;
}

KernelSpec KernelSpec::squared_exponential(int dim, double variance, double lengthscale) {
  KernelSpec s;
  s.family = KernelFamily::SquaredExponential;
  s.dim = dim;
  s.variance = variance;
  s.lengthscale = lengthscale;
  return s;
}

KernelSpec KernelSpec::matern(int dim, double nu, double rho) {
  KernelSpec s;
  s.family = KernelFamily::Matern;
  s.dim = dim;
  s.nu = nu;
  s.rho = rho;
  return s;
}

void KernelSpec::validate() const {
  if (dim <= 0) throw InputError("kernel dimension must be positive");
  if (!(variance > 0) || !(lengthscale > 0) || !(nu > 0) || !(rho > 0))
    throw InputError("kernel hyperparameters must be strictly positive");
  if (family == KernelFamily::Matern && nu != 0.5 && nu != 1.5 && nu != 2.5)
    throw InputError("matern kernel supports nu in {0.5, 1.5, 2.5} only");
}

bool KernelSpec::exceeds_unit_bound() const {
  return family == KernelFamily::SquaredExponential && variance > 1.0;
}

bool operator==(const KernelSpec& a, const KernelSpec& b) {
  return a.family == b.family && a.variance == b.variance && a.lengthscale == b.lengthscale && a.nu == b.nu &&
         a.rho == b.rho && a.dim == b.dim;
}

void warn_if_unnormalized(const KernelSpec& spec) {
  static std::atomic<bool> warned{false};
  if (spec.exceeds_unit_bound() && !warned.exchange(true))
    std::cerr << "warning: SE kernel variance " << spec.variance
              << " > 1, k(x,x) <= 1 does not hold for this kernel\n";
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
  j = nlohmann::json{{"family", to_string(spec.family)},
                     {"variance", spec.variance},
                     {"lengthscale", spec.lengthscale},
                     {"nu", spec.nu},
                     {"rho", spec.rho},
                     {"dim", spec.dim}};
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
  if (!j.is_object()) throw InputError("kernel spec must be a JSON object");
  KernelSpec s;
  s.family = kernel_family_from_string(j.at("family").get<std::string>());
  s.variance = j.value("variance", 1.0);
  s.lengthscale = j.value("lengthscale", 1.0);
  s.nu = j.value("nu", 2.5);
  s.rho = j.value("rho", 1.0);
  s.dim = j.at("dim").get<int>();
  s.validate();
  spec = s;
}

namespace {

void check_dims(const KernelSpec& spec, const Point& x, const Point& y) {
  if (x.size() != spec.dim || y.size() != spec.dim) {
    std::ostringstream os;
    os << "kernel expects dimension " << spec.dim << ", got " << x.size() << " and " << y.size();
    throw InputError(os.str());
  }
}

double matern(double nu, double r) {
  if (nu == 0.5) return std::exp(-r);
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * r;
    return (1.0 + a) * std::exp(-a);
  }
  const double a = std::sqrt(5.0) * r;
  return (1.0 + a + a * a / 3.0) * std::exp(-a);
}

}  // namespace

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y) {
  check_dims(spec, x, y);
  switch (spec.family) {
    case KernelFamily::Linear:
      return x.dot(y);
    case KernelFamily::SquaredExponential: {
      const double d2 = (x - y).squaredNorm();
      return spec.variance * std::exp(-d2 / (spec.lengthscale * spec.lengthscale));
    }
    case KernelFamily::Matern:
      return matern(spec.nu, (x - y).norm() / spec.rho);
  }
  return 0.0;
}

Matrix gram(const KernelSpec& spec, std::span<const Point> points, double jitter) {
  if (points.empty()) throw InputError("gram requires at least one point");
  if (jitter < 0) throw InputError("jitter must be non-negative");
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = eval_kernel(spec, points[i], points[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
    k(i, i) = eval_kernel(spec, points[i], points[i]) + jitter;
  }
  return k;
}

Matrix cross_gram(const KernelSpec& spec, std::span<const Point> a, std::span<const Point> b) {
  Matrix k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) k(i, j) = eval_kernel(spec, a[i], b[j]);
  return k;
}

Vector kernel_column(const KernelSpec& spec, std::span<const Point> points, const Point& x) {
  Vector col(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) col[i] = eval_kernel(spec, points[i], x);
  return col;
}

Eigen::LLT<Matrix> cholesky(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    std::ostringstream os;
    os << "Cholesky factorization failed (n=" << m.rows() << ", smallest eigenvalue "
       << es.eigenvalues().minCoeff() << ")";
    throw NumericalError(os.str());
  }
  return llt;
}

double duel_kernel(const KernelSpec& spec, const Duel& a, const Duel& b) {
  return eval_kernel(spec, a.x, b.x) + eval_kernel(spec, a.x_prime, b.x_prime);
}

Matrix duel_gram(const KernelSpec& spec, std::span<const Duel> duels) {
  const auto n = static_cast<Eigen::Index>(duels.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = duel_kernel(spec, duels[i], duels[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

double duel_sigma(const KernelSpec& spec, std::span<const Duel> past, double lambda, const Duel& query) {
  if (!(lambda > 0)) throw InputError("lambda must be positive");
  const double prior = duel_kernel(spec, query, query);
  if (past.empty()) return std::sqrt(std::max(prior, 0.0));

  Matrix k = duel_gram(spec, past);
  k.diagonal().array() += lambda;
  const auto llt = cholesky(k);
  Vector col(static_cast<Eigen::Index>(past.size()));
  for (std::size_t i = 0; i < past.size(); ++i) col[i] = duel_kernel(spec, past[i], query);
  const Vector half = llt.matrixL().solve(col);
  return std::sqrt(std::max(prior - half.squaredNorm(), 0.0));
}

}  // namespace popbo
