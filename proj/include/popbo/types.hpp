#ifndef POPBO_TYPES_HPP
#define POPBO_TYPES_HPP

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace popbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;
using PointList = std::vector<Point>;

/// Malformed arguments: dimension mismatch, out-of-range parameters, unknown names.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Factorization or solve failures.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong session state (e.g. observe without a pending duel).
struct ProtocolError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Axis-aligned box domain.
struct Box {
  Vector lo;
  Vector hi;

  Box() = default;
  Box(Vector lo_, Vector hi_);

  static Box uniform(int dim, double lo, double hi);

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Point& x, double tol = 1e-12) const;
  Point clamp(const Point& x) const;
  Vector width() const { return hi - lo; }
};

}  // namespace popbo

#endif
