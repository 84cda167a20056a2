#ifndef POPBO_LIKELIHOOD_HPP
#define POPBO_LIKELIHOOD_HPP

#include "popbo/kernel.hpp"
#include "popbo/types.hpp"

#include <json.hpp>

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace popbo {

/// One answered comparison. pref = 1 when x beat x_prime.
struct DuelRecord {
  Point x;
  Point x_prime;
  int pref = 0;
};

/// Sequentially chained duels: records[tau].x_prime == records[tau-1].x, with
/// records[0].x_prime == x0. The chain is what lets the likelihood depend only
/// on the values at x0..xt.
class History {
 public:
  History() = default;
  explicit History(Point x0);
  /// Validates chaining and bits; throws InputError otherwise.
  History(Point x0, std::vector<DuelRecord> records);

  const Point& x0() const { return x0_; }
  const std::vector<DuelRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Reference for the next duel: the last challenger, or x0.
  const Point& last_point() const;

  /// Appends (x, last_point(), pref).
  void append(Point x, int pref);

  /// x0, x1, ..., xt.
  PointList points() const;
  std::vector<int> outcomes() const;
  std::vector<Duel> duels() const;

  /// Prefix with the first `count` records.
  History prefix(std::size_t count) const;

 private:
  Point x0_;
  std::vector<DuelRecord> records_;
};

/// Sum over tau of log P(outcome_tau | z_tau - z_{tau-1}); zero for no outcomes.
double log_likelihood(const Vector& values, std::span<const int> outcomes);

/// Gradient of log_likelihood with respect to values.
Vector grad_log_likelihood(const Vector& values, std::span<const int> outcomes);

/// Adds a constant to every value; the likelihood is invariant under this.
Vector shift(const Vector& values, double c);

/// Stable log(e^a + e^b).
double log_sum_exp(double a, double b);

nlohmann::json point_to_json(const Point& p);
Point point_from_json(const nlohmann::json& j);

/// Box as [[lo, hi], ...].
nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j);
nlohmann::json history_to_json(const History& h);
History history_from_json(const nlohmann::json& j);

/// JSON lines: a header {"x0": [...], "kernel": {...}} then one
/// {"x": [...], "x_prime": [...], "pref": 0|1} per record.
void write_history_jsonl(std::ostream& os, const History& history, const KernelSpec& kernel);
std::pair<History, KernelSpec> read_history_jsonl(std::istream& is);

}  // namespace popbo

#endif
