#ifndef POPBO_KERNEL_HPP
#define POPBO_KERNEL_HPP

#include "popbo/types.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>

#include <span>
#include <string>

namespace popbo {

enum class KernelFamily { Linear, SquaredExponential, Matern };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Base kernel k on R^d.
///
///   linear:  k(x, y) = <x, y>
///   se:      k(x, y) = variance * exp(-|x - y|^2 / lengthscale^2)
///   matern:  closed form for nu in {1/2, 3/2, 5/2} with scale rho (unit variance)
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double variance = 1.0;
  double lengthscale = 1.0;
  double nu = 2.5;
  double rho = 1.0;
  int dim = 1;

  static KernelSpec linear(int dim);
  static KernelSpec squared_exponential(int dim, double variance, double lengthscale);
  static KernelSpec matern(int dim, double nu, double rho);

  /// Throws InputError on non-positive hyperparameters or unsupported nu.
  void validate() const;

  /// True when k(x, x) may exceed 1 (SE with variance > 1). Such kernels are
  /// accepted but callers should warn, see warn_if_unnormalized().
  bool exceeds_unit_bound() const;
};

bool operator==(const KernelSpec& a, const KernelSpec& b);

/// Writes a one-line warning to stderr (once per process) when the kernel is not normalized.
void warn_if_unnormalized(const KernelSpec& spec);

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, const Point& x, const Point& y);

/// K + jitter * I over the given points.
Matrix gram(const KernelSpec& spec, std::span<const Point> points, double jitter);

/// Rectangular matrix k(a_i, b_j).
Matrix cross_gram(const KernelSpec& spec, std::span<const Point> a, std::span<const Point> b);

/// Column (k(p_i, x))_i.
Vector kernel_column(const KernelSpec& spec, std::span<const Point> points, const Point& x);

/// Cholesky factorization of a symmetric matrix; on failure throws NumericalError
/// carrying the smallest eigenvalue of the input.
Eigen::LLT<Matrix> cholesky(const Matrix& m);

/// A compared pair (x, x'); the first element is the challenger, the second the reference.
struct Duel {
  Point x;
  Point x_prime;
};

/// Additive kernel on pairs: k(x, xb) + k(x', xb').
double duel_kernel(const KernelSpec& spec, const Duel& a, const Duel& b);

/// Gram matrix of duel_kernel over a duel sequence (no regularization).
Matrix duel_gram(const KernelSpec& spec, std::span<const Duel> duels);

/// Duel-wise uncertainty: sqrt(k(w,w) - k_w^T (K_past + lambda I)^{-1} k_w), clamped at 0.
double duel_sigma(const KernelSpec& spec, std::span<const Duel> past, double lambda, const Duel& query);

}  // namespace popbo

#endif
