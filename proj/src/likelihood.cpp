#include "popbo/likelihood.hpp"

#include "popbo/preference.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace popbo {

namespace {

void check_bit(int pref) {
  if (pref != 0 && pref != 1) throw InputError("preference must be 0 or 1");
}

void check_lengths(const Vector& values, std::span<const int> outcomes) {
  if (static_cast<std::size_t>(values.size()) != outcomes.size() + 1)
    throw InputError("value vector must have one more entry than the outcome sequence");
}

}  // namespace

History::History(Point x0) : x0_(std::move(x0)) {}

History::History(Point x0, std::vector<DuelRecord> records) : x0_(std::move(x0)), records_(std::move(records)) {
  const Point* prev = &x0_;
  for (const auto& r : records_) {
    check_bit(r.pref);
    if (r.x.size() != x0_.size() || r.x_prime.size() != x0_.size())
      throw InputError("history record has wrong dimension");
    if (r.x_prime != *prev) throw InputError("history violates sequential chaining (x'_t != x_{t-1})");
    prev = &r.x;
  }
}

const Point& History::last_point() const { return records_.empty() ? x0_ : records_.back().x; }

void History::append(Point x, int pref) {
  check_bit(pref);
  if (x.size() != x0_.size()) throw InputError("duel point has wrong dimension");
  Point ref = last_point();
  records_.push_back(DuelRecord{std::move(x), std::move(ref), pref});
}

PointList History::points() const {
  PointList pts;
  pts.reserve(records_.size() + 1);
  pts.push_back(x0_);
  for (const auto& r : records_) pts.push_back(r.x);
  return pts;
}

std::vector<int> History::outcomes() const {
  std::vector<int> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.pref);
  return out;
}

std::vector<Duel> History::duels() const {
  std::vector<Duel> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(Duel{r.x, r.x_prime});
  return out;
}

History History::prefix(std::size_t count) const {
  if (count > records_.size()) throw InputError("history prefix longer than history");
  History h(x0_);
  h.records_.assign(records_.begin(), records_.begin() + static_cast<std::ptrdiff_t>(count));
  return h;
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_likelihood(const Vector& values, std::span<const int> outcomes) {
  check_lengths(values, outcomes);
  double total = 0.0;
  for (std::size_t tau = 1; tau <= outcomes.size(); ++tau) {
    const double z = values[static_cast<Eigen::Index>(tau)];
    const double zp = values[static_cast<Eigen::Index>(tau - 1)];
    const int y = outcomes[tau - 1];
    check_bit(y);
    total += (y == 1 ? z : zp) - log_sum_exp(z, zp);
  }
  return total;
}

Vector grad_log_likelihood(const Vector& values, std::span<const int> outcomes) {
  check_lengths(values, outcomes);
  Vector g = Vector::Zero(values.size());
  for (std::size_t tau = 1; tau <= outcomes.size(); ++tau) {
    const auto i = static_cast<Eigen::Index>(tau);
    const int y = outcomes[tau - 1];
    check_bit(y);
    const double r = y - logistic(values[i] - values[i - 1]);
    g[i] += r;
    g[i - 1] -= r;
  }
  return g;
}

Vector shift(const Vector& values, double c) { return (values.array() + c).matrix(); }

nlohmann::json point_to_json(const Point& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) arr.push_back(p[i]);
  return arr;
}

Point point_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("point must be a JSON array");
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError("point coordinates must be numbers");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return p;
}

nlohmann::json box_to_json(const Box& b) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < b.dim(); ++i) out.push_back({b.lo[i], b.hi[i]});
  return out;
}

Box box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw InputError("domain must be a list of [lo, hi] pairs");
  const auto d = static_cast<Eigen::Index>(j.size());
  Vector lo(d), hi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& e = j[static_cast<std::size_t>(i)];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw InputError("domain entries must be [lo, hi]");
    lo[i] = e[0].get<double>();
    hi[i] = e[1].get<double>();
  }
  return Box(lo, hi);
}

nlohmann::json history_to_json(const History& h) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : h.records())
    recs.push_back({{"x", point_to_json(r.x)}, {"x_prime", point_to_json(r.x_prime)}, {"pref", r.pref}});
  return {{"x0", point_to_json(h.x0())}, {"records", recs}};
}

History history_from_json(const nlohmann::json& j) {
  std::vector<DuelRecord> recs;
  for (const auto& r : j.at("records"))
    recs.push_back(DuelRecord{point_from_json(r.at("x")), point_from_json(r.at("x_prime")), r.at("pref").get<int>()});
  return History(point_from_json(j.at("x0")), std::move(recs));
}

void write_history_jsonl(std::ostream& os, const History& history, const KernelSpec& kernel) {
  os << nlohmann::json{{"x0", point_to_json(history.x0())}, {"kernel", kernel}}.dump() << '\n';
  for (const auto& r : history.records())
    os << nlohmann::json{{"x", point_to_json(r.x)}, {"x_prime", point_to_json(r.x_prime)}, {"pref", r.pref}}.dump()
       << '\n';
}

std::pair<History, KernelSpec> read_history_jsonl(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("history stream is empty");
  try {
    const auto header = nlohmann::json::parse(line);
    auto kernel = header.at("kernel").get<KernelSpec>();
    std::vector<DuelRecord> recs;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto r = nlohmann::json::parse(line);
      recs.push_back(
          DuelRecord{point_from_json(r.at("x")), point_from_json(r.at("x_prime")), r.at("pref").get<int>()});
    }
    return {History(point_from_json(header.at("x0")), std::move(recs)), kernel};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed history line: ") + e.what());
  }
}

}  // namespace popbo
