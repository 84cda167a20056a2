#include "popbo/session.hpp"

#include <cmath>

namespace popbo {

void PopBoConfig::validate() const {
  kernel.validate();
  if (domain.dim() != kernel.dim) throw InputError("domain and kernel dimensions differ");
  if (x0.size() != domain.dim()) throw InputError("x0 has wrong dimension");
  if (!domain.contains(x0)) throw InputError("x0 lies outside the domain");
  if (!(norm_bound > 0) || !(beta0 > 0) || !(lambda > 0) || !(jitter > 0) || !(guard_factor > 0))
    throw InputError("norm_bound, beta0, lambda, jitter and guard_factor must be positive");
  if (!labels.empty() && static_cast<int>(labels.size()) != domain.dim())
    throw InputError("labels must name every dimension");
}

void to_json(nlohmann::json& j, const PopBoConfig& c) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& l : c.labels) labels.push_back({{"name", l.name}, {"unit", l.unit}});
  j = nlohmann::json{{"kernel", c.kernel},
                     {"domain", box_to_json(c.domain)},
                     {"norm_bound", c.norm_bound},
                     {"beta0", c.beta0},
                     {"lambda", c.lambda},
                     {"jitter", c.jitter},
                     {"x0", point_to_json(c.x0)},
                     {"search", c.search},
                     {"seed", c.seed},
                     {"adapt_norm_bound", c.adapt_norm_bound},
                     {"guard_factor", c.guard_factor},
                     {"labels", labels},
                     {"solver",
                      {{"opt_tol", c.solver.opt_tol},
                       {"feas_tol", c.solver.feas_tol},
                       {"max_iterations", c.solver.max_iterations},
                       {"max_multiplier_steps", c.solver.max_multiplier_steps}}}};
}

void from_json(const nlohmann::json& j, PopBoConfig& c) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  PopBoConfig out;
  try {
    out.domain = box_from_json(j.at("domain"));
    if (j.contains("kernel")) {
      out.kernel = j.at("kernel").get<KernelSpec>();
    } else {
      out.kernel = KernelSpec::squared_exponential(out.domain.dim(), 1.0, 1.0);
    }
    out.norm_bound = j.value("norm_bound", out.norm_bound);
    out.beta0 = j.value("beta0", out.beta0);
    out.lambda = j.value("lambda", out.lambda);
    out.jitter = j.value("jitter", out.jitter);
    out.x0 = j.contains("x0") ? point_from_json(j.at("x0")) : Point(0.5 * (out.domain.lo + out.domain.hi));
    if (j.contains("search")) out.search = j.at("search").get<OuterSearchOptions>();
    out.seed = j.value("seed", std::uint64_t{0});
    out.adapt_norm_bound = j.value("adapt_norm_bound", false);
    out.guard_factor = j.value("guard_factor", out.guard_factor);
    if (j.contains("labels")) {
      for (const auto& l : j.at("labels"))
        out.labels.push_back({l.at("name").get<std::string>(), l.value("unit", std::string{})});
    }
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      out.solver.opt_tol = s.value("opt_tol", out.solver.opt_tol);
      out.solver.feas_tol = s.value("feas_tol", out.solver.feas_tol);
      out.solver.max_iterations = s.value("max_iterations", out.solver.max_iterations);
      out.solver.max_multiplier_steps = s.value("max_multiplier_steps", out.solver.max_multiplier_steps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
  out.validate();
  c = std::move(out);
}

double beta1(std::size_t t, double beta0) {
  if (t < 1) throw InputError("beta schedule is defined for t >= 1");
  return beta0 * std::sqrt(static_cast<double>(t));
}

Session::Session(PopBoConfig config, Execution exec)
    : config_(std::move(config)), exec_(exec), history_(config_.x0), bound_(config_.norm_bound) {
  config_.validate();
  warn_if_unnormalized(config_.kernel);
  refit(nullptr, 0.0);
}

void Session::refit(const Vector* warm, double warm_multiplier) {
  model_.emplace(history_, config_.kernel, bound_, config_.jitter);
  mle_ = solve_mle(*model_, config_.solver, warm, warm_multiplier);
}

ConfidenceSet Session::confidence_set() const {
  return ConfidenceSet(*model_, mle_, beta1(history_.size() + 1, config_.beta0), config_.solver);
}

Duel Session::next_query() {
  if (pending_) throw ProtocolError("a duel is already pending");
  const std::size_t t = history_.size() + 1;
  const double beta = beta1(t, config_.beta0);
  const ConfidenceSet set(*model_, mle_, beta, config_.solver);
  Rng rng = Rng(config_.seed).split("acquisition").split(static_cast<std::uint64_t>(t));
  const Point reference = history_.last_point();
  const AcquisitionResult best = maximize_acquisition(config_.domain, set, reference, config_.search, rng, exec_);

  PendingQuery q;
  q.x = best.x;
  q.x_prime = reference;
  q.advantage = best.advantage;
  q.beta = beta;
  const auto past = history_.duels();
  q.sigma = duel_sigma(config_.kernel, past, config_.lambda, Duel{q.x, q.x_prime});
  q.radius = 2.0 * (2.0 * bound_ + std::sqrt(beta / config_.lambda)) * q.sigma;
  pending_ = q;
  return Duel{q.x, q.x_prime};
}

void Session::observe(int pref) {
  if (!pending_) throw ProtocolError("no pending duel to answer");
  if (pref != 0 && pref != 1) throw InputError("preference must be 0 or 1");
  history_.append(pending_->x, pref);
  sigma_trace_.push_back(pending_->sigma);
  radius_trace_.push_back(pending_->radius);
  advantage_trace_.push_back(pending_->advantage);
  beta_trace_.push_back(pending_->beta);
  pending_.reset();
  const Vector warm = mle_.argmax;
  refit(&warm, mle_.multiplier);
  if (config_.adapt_norm_bound) adapt_norm_bound();
  bound_trace_.push_back(bound_);
}

std::size_t t_star_index(std::span<const double> radii) {
  if (radii.empty()) throw InputError("no radii to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] < radii[best]) best = i;
  return best + 1;
}

ReportedSolution Session::report_t_star() const {
  if (radius_trace_.empty()) throw ProtocolError("no answered duels to report from");
  const std::size_t t = t_star_index(radius_trace_);
  return {t, history_.records()[t - 1].x, radius_trace_[t - 1]};
}

Point Session::report_max_mle() const { return report_max_mle(config_.search); }

Point Session::report_max_mle(const OuterSearchOptions& search) const {
  if (history_.empty()) return history_.x0();
  const Interpolant fhat(config_.kernel, model_->points(), mle_.argmax, config_.jitter);
  Rng rng = Rng(config_.seed).split("report").split(static_cast<std::uint64_t>(history_.size()));
  return maximize_over_domain(config_.domain, [&](const Point& x) { return fhat(x); }, search, rng);
}

bool Session::adapt_norm_bound() {
  if (history_.empty()) return false;
  DuelModel wider(history_, config_.kernel, 2.0 * bound_, config_.jitter);
  const Vector warm = mle_.argmax.head(mle_.argmax.size() - 1);
  SolveReport alt = solve_mle(wider, config_.solver, &warm, mle_.multiplier);
  const double gain = alt.objective - mle_.objective;
  if (gain <= config_.guard_factor * beta1(history_.size(), config_.beta0)) return false;
  bound_ *= 2.0;
  model_.emplace(std::move(wider));
  mle_ = std::move(alt);
  ++doublings_;
  return true;
}

namespace {

nlohmann::json doubles(const std::vector<double>& v) { return nlohmann::json(v); }

}  // namespace

nlohmann::json Session::checkpoint() const {
  nlohmann::json j{{"version", 1},
                   {"config", config_},
                   {"history", history_to_json(history_)},
                   {"norm_bound", bound_},
                   {"traces",
                    {{"sigma", doubles(sigma_trace_)},
                     {"radius", doubles(radius_trace_)},
                     {"advantage", doubles(advantage_trace_)},
                     {"norm_bound", doubles(bound_trace_)}}}};
  if (pending_) j["pending"] = {{"x", point_to_json(pending_->x)}, {"x_prime", point_to_json(pending_->x_prime)}};
  else j["pending"] = nullptr;
  return j;
}

Session Session::restore(const nlohmann::json& checkpoint, Execution exec) {
  PopBoConfig config;
  History recorded;
  try {
    config = checkpoint.at("config").get<PopBoConfig>();
    recorded = history_from_json(checkpoint.at("history"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
  Session s(std::move(config), exec);
  if (recorded.x0() != s.config_.x0) throw ProtocolError("checkpoint history does not start at config x0");
  for (const auto& r : recorded.records()) {
    const Duel d = s.next_query();
    if (d.x != r.x || d.x_prime != r.x_prime) throw ProtocolError("checkpoint replay diverged from recorded queries");
    s.observe(r.pref);
  }
  if (checkpoint.contains("traces")) {
    const auto& tr = checkpoint.at("traces");
    if (tr.value("radius", std::vector<double>{}) != s.radius_trace_ ||
        tr.value("sigma", std::vector<double>{}) != s.sigma_trace_)
      throw ProtocolError("checkpoint replay produced different traces");
  }
  if (checkpoint.contains("pending") && !checkpoint.at("pending").is_null()) {
    const Duel d = s.next_query();
    if (d.x != point_from_json(checkpoint.at("pending").at("x")))
      throw ProtocolError("checkpoint replay produced a different pending duel");
  }
  return s;
}

nlohmann::json Session::trace_json() const {
  nlohmann::json steps = nlohmann::json::array();
  std::size_t best = 0;
  for (std::size_t i = 0; i < history_.size(); ++i) {
    if (radius_trace_[i] < radius_trace_[best]) best = i;
    const auto& r = history_.records()[i];
    steps.push_back({{"t", i + 1},
                     {"x", point_to_json(r.x)},
                     {"x_prime", point_to_json(r.x_prime)},
                     {"pref", r.pref},
                     {"sigma", sigma_trace_[i]},
                     {"radius", radius_trace_[i]},
                     {"advantage", advantage_trace_[i]},
                     {"beta", beta_trace_[i]},
                     {"norm_bound", bound_trace_[i]},
                     {"t_star", best + 1}});
  }
  return {{"t", history_.size()}, {"x0", point_to_json(history_.x0())}, {"steps", steps}};
}

Point maximize_over_domain(const Box& domain, const std::function<double(const Point&)>& f,
                           const OuterSearchOptions& search, Rng& rng) {
  if (domain.dim() <= 2) {
    const PointList grid = candidate_grid(domain, search);
    std::vector<double> vals(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) vals[i] = f(grid[i]);
    return grid[argmax_first(vals)];
  }
  Point best_x;
  double best_v = -std::numeric_limits<double>::infinity();
  for (Point x : latin_hypercube(domain, search.lhs_starts, rng)) {
    double v = f(x);
    Vector h = 0.25 * domain.width();
    for (int s = 0; s < search.refine_steps; ++s) {
      bool moved = false;
      for (int j = 0; j < domain.dim() && !moved; ++j)
        for (double sign : {1.0, -1.0}) {
          Point y = x;
          y[j] += sign * h[j];
          y = domain.clamp(y);
          const double fy = f(y);
          if (fy > v) {
            x = y;
            v = fy;
            moved = true;
            break;
          }
        }
      if (!moved) h *= 0.5;
    }
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace popbo
