#include "popbo/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>

namespace popbo {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string config_hash(const PopBoConfig& config) {
  const std::string s = nlohmann::json(config).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EpisodeTrace run_episode(const PopBoConfig& config, const GroundTruth& truth, std::size_t horizon, Rng& rng,
                         Execution exec, const EpisodeOptions& options) {
  if (horizon < 1) throw InputError("horizon must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  EpisodeTrace trace;
  trace.instance = truth.name;
  trace.seed = config.seed;
  trace.config_hash = config_hash(config);
  trace.beta0 = config.beta0;
  ComparisonOracle oracle = oracle_from_truth(truth, rng.split("oracle"));
  Session session(config, exec);
  std::vector<double> truth_values{truth(config.x0)};
  double cum = 0.0;
  try {
    for (std::size_t t = 1; t <= horizon; ++t) {
      const Duel duel = session.next_query();
      const double radius = session.pending()->radius;
      session.observe(oracle.compare(duel.x, duel.x_prime));
      truth_values.push_back(truth(duel.x));

      EpisodeStep step;
      step.t = t;
      step.x = duel.x;
      step.regret = truth.regret(duel.x);
      cum += step.regret;
      step.cum_regret = cum;
      step.report_radius = radius;
      const ReportedSolution rep = session.report_t_star();
      step.t_star = rep.t_star;
      step.report_subopt = truth.regret(rep.x);
      step.mle_subopt = options.track_max_mle ? truth.regret(session.report_max_mle()) : 0.0;
      const Vector f = Eigen::Map<const Vector>(truth_values.data(), static_cast<Eigen::Index>(truth_values.size()));
      const auto outcomes = session.history().outcomes();
      step.truth_loglik = log_likelihood(f, outcomes);
      step.mle_loglik = session.mle().objective;
      step.norm_bound = session.norm_bound();
      trace.steps.push_back(std::move(step));
    }
  } catch (const std::exception& e) {
    trace.wall_seconds = seconds_since(start);
    throw EpisodeFailure(std::string("episode seed ") + std::to_string(config.seed) + " failed at step " +
                             std::to_string(trace.steps.size() + 1) + ": " + e.what(),
                         std::move(trace));
  }
  trace.wall_seconds = seconds_since(start);
  return trace;
}

std::vector<double> cumulative_sum(const std::vector<double>& values) {
  std::vector<double> out(values.size());
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = s += values[i];
  return out;
}

std::vector<double> cumulative_regret(const EpisodeTrace& trace) {
  if (trace.steps.empty()) throw InputError("empty trace");
  std::vector<double> r;
  r.reserve(trace.steps.size());
  for (const auto& s : trace.steps) r.push_back(s.regret);
  return cumulative_sum(r);
}

double loglog_slope(const std::vector<double>& curve, std::size_t burn_in) {
  if (curve.size() < burn_in + 2) throw InputError("need at least two points after burn-in");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double n = 0;
  for (std::size_t i = burn_in; i < curve.size(); ++i) {
    if (!(curve[i] > 0)) throw InputError("log-log fit needs positive values after burn-in");
    const double x = std::log(static_cast<double>(i + 1));
    const double y = std::log(curve[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

SeriesStats series_stats(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw InputError("no runs to aggregate");
  const std::size_t len = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != len) throw InputError("runs have different horizons");
  SeriesStats s{std::vector<double>(len, 0.0), std::vector<double>(len, 0.0)};
  const double n = static_cast<double>(runs.size());
  for (std::size_t t = 0; t < len; ++t) {
    double m = 0.0;
    for (const auto& r : runs) m += r[t];
    m /= n;
    double v = 0.0;
    for (const auto& r : runs) v += (r[t] - m) * (r[t] - m);
    s.mean[t] = m;
    s.std[t] = runs.size() > 1 ? std::sqrt(v / (n - 1)) : 0.0;
  }
  return s;
}

Summary aggregate(const std::vector<EpisodeTrace>& traces, std::size_t burn_in) {
  if (traces.empty()) throw InputError("no traces to aggregate");
  std::vector<std::vector<double>> regret, cum, rep, mle;
  for (const auto& tr : traces) {
    if (tr.steps.size() != traces.front().steps.size()) throw InputError("traces have different horizons");
    std::vector<double> a, b, c, d;
    for (const auto& s : tr.steps) {
      a.push_back(s.regret);
      b.push_back(s.cum_regret);
      c.push_back(s.report_subopt);
      d.push_back(s.mle_subopt);
    }
    regret.push_back(std::move(a));
    cum.push_back(std::move(b));
    rep.push_back(std::move(c));
    mle.push_back(std::move(d));
  }
  Summary s;
  s.runs = traces.size();
  s.horizon = traces.front().steps.size();
  s.burn_in = burn_in;
  s.regret = series_stats(regret);
  s.cum_regret = series_stats(cum);
  s.report_subopt = series_stats(rep);
  s.mle_subopt = series_stats(mle);
  s.slope = std::nan("");
  try {
    s.slope = loglog_slope(s.cum_regret.mean, burn_in);
  } catch (const InputError&) {
    // curve too short or zero regret throughout; slope stays NaN
  }
  return s;
}

nlohmann::json summary_to_json(const Summary& s) {
  auto final_of = [](const SeriesStats& st) {
    return nlohmann::json{{"mean", st.mean.empty() ? 0.0 : st.mean.back()},
                          {"std", st.std.empty() ? 0.0 : st.std.back()}};
  };
  auto series = [](const SeriesStats& st) { return nlohmann::json{{"mean", st.mean}, {"std", st.std}}; };
  return {{"runs", s.runs},
          {"horizon", s.horizon},
          {"burn_in", s.burn_in},
          {"loglog_slope", std::isnan(s.slope) ? nlohmann::json(nullptr) : nlohmann::json(s.slope)},
          {"final",
           {{"report_subopt", final_of(s.report_subopt)},
            {"mle_subopt", final_of(s.mle_subopt)},
            {"cum_regret", final_of(s.cum_regret)},
            {"regret", final_of(s.regret)}}},
          {"per_step",
           {{"regret", series(s.regret)},
            {"cum_regret", series(s.cum_regret)},
            {"report_subopt", series(s.report_subopt)},
            {"mle_subopt", series(s.mle_subopt)}}}};
}

std::string episode_csv(const EpisodeTrace& trace) {
  std::ostringstream os;
  const Eigen::Index d = trace.steps.empty() ? 0 : trace.steps.front().x.size();
  os << "t";
  for (Eigen::Index j = 0; j < d; ++j) os << ",x" << j + 1;
  os << ",regret,cum_regret,report_radius,t_star,report_subopt,mle_subopt,truth_loglik,mle_loglik,norm_bound\n";
  for (const auto& s : trace.steps) {
    os << s.t;
    for (Eigen::Index j = 0; j < d; ++j) os << ',' << fmt(s.x[j]);
    os << ',' << fmt(s.regret) << ',' << fmt(s.cum_regret) << ',' << fmt(s.report_radius) << ',' << s.t_star << ','
       << fmt(s.report_subopt) << ',' << fmt(s.mle_subopt) << ',' << fmt(s.truth_loglik) << ','
       << fmt(s.mle_loglik) << ',' << fmt(s.norm_bound) << '\n';
  }
  return os.str();
}

std::string curves_csv(const Summary& s) {
  std::ostringstream os;
  os << "t,regret_mean,regret_std,cum_regret_mean,cum_regret_std,report_subopt_mean,report_subopt_std,"
        "mle_subopt_mean,mle_subopt_std\n";
  for (std::size_t t = 0; t < s.horizon; ++t)
    os << t + 1 << ',' << fmt(s.regret.mean[t]) << ',' << fmt(s.regret.std[t]) << ',' << fmt(s.cum_regret.mean[t])
       << ',' << fmt(s.cum_regret.std[t]) << ',' << fmt(s.report_subopt.mean[t]) << ','
       << fmt(s.report_subopt.std[t]) << ',' << fmt(s.mle_subopt.mean[t]) << ',' << fmt(s.mle_subopt.std[t])
       << '\n';
  return os.str();
}

void to_json(nlohmann::json& j, const BenchSpec& s) {
  j = nlohmann::json{{"instance", s.instance},
                     {"base_seed", s.base_seed},
                     {"seeds", s.seeds},
                     {"horizon", s.horizon},
                     {"beta0", s.beta0},
                     {"lambda", s.lambda},
                     {"jitter", s.jitter},
                     {"norm_bound", s.norm_bound ? nlohmann::json(*s.norm_bound) : nlohmann::json(nullptr)},
                     {"kernel", s.kernel ? nlohmann::json(*s.kernel) : nlohmann::json(nullptr)},
                     {"search", s.search},
                     {"burn_in", s.burn_in},
                     {"adapt_norm_bound", s.adapt_norm_bound}};
}

PopBoConfig episode_config(const BenchSpec& spec, const GroundTruth& truth, std::uint64_t seed) {
  PopBoConfig c;
  c.kernel = spec.kernel ? *spec.kernel : truth.kernel;
  c.domain = truth.domain;
  c.norm_bound = spec.norm_bound ? *spec.norm_bound : truth.norm_bound;
  c.beta0 = spec.beta0;
  c.lambda = spec.lambda;
  c.jitter = spec.jitter;
  c.search = spec.search;
  c.seed = seed;
  c.adapt_norm_bound = spec.adapt_norm_bound;
  Rng rng = Rng(seed).split("x0");
  if (truth.domain.dim() <= 2) {
    const PointList grid = candidate_grid(truth.domain, spec.search);
    c.x0 = grid[rng.below(grid.size())];
  } else {
    c.x0 = Point(truth.domain.dim());
    for (int j = 0; j < truth.domain.dim(); ++j) c.x0[j] = rng.uniform(truth.domain.lo[j], truth.domain.hi[j]);
  }
  return c;
}

BenchResult run_bench(const BenchSpec& spec, Execution exec) {
  if (!is_known_instance(spec.instance)) throw InputError("unknown instance: " + spec.instance);
  if (spec.seeds < 1 || spec.horizon < 1) throw InputError("seeds and horizon must be positive");
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::ptrdiff_t>(spec.seeds);
  std::vector<std::optional<EpisodeTrace>> done(spec.seeds);
  std::vector<std::optional<EpisodeTrace>> partial(spec.seeds);
  std::vector<std::string> errors(spec.seeds);
  std::vector<nlohmann::json> manifests(spec.seeds);
  std::vector<nlohmann::json> configs(spec.seeds);

  auto one = [&](std::ptrdiff_t i) {
    const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(i);
    try {
      const GroundTruth truth = make_instance(spec.instance, seed);
      manifests[i] = truth.manifest;
      const PopBoConfig config = episode_config(spec, truth, seed);
      configs[i] = config;
      Rng rng(seed);
      // Episodes already occupy the threads; keep each session's candidate loop serial.
      done[i] = run_episode(config, truth, spec.horizon, rng, Execution::Serial, spec.episode);
    } catch (const EpisodeFailure& e) {
      partial[i] = e.partial();
      errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = std::string("episode seed ") + std::to_string(seed) + ": " + e.what();
    }
  };
  if (exec == Execution::Serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  } else {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
  }

  BenchResult r;
  for (std::size_t i = 0; i < spec.seeds; ++i) {
    if (done[i]) r.traces.push_back(std::move(*done[i]));
    if (partial[i]) r.failed.push_back(std::move(*partial[i]));
    if (!errors[i].empty()) r.errors.push_back(errors[i]);
    r.manifests.push_back(std::move(manifests[i]));
    r.configs.push_back(std::move(configs[i]));
  }
  if (!r.traces.empty()) r.summary = aggregate(r.traces, spec.burn_in);
  r.wall_seconds = seconds_since(start);
  return r;
}

std::filesystem::path write_bench_outputs(const std::filesystem::path& out_dir, const std::string& run_id,
                                          const BenchSpec& spec, const BenchResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir = out_dir / "runs" / run_id;
  fs::create_directories(dir);
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw InputError("cannot write " + p.string());
    os << text;
  };
  for (const auto& tr : result.traces) write(dir / ("episode_" + std::to_string(tr.seed) + ".csv"), episode_csv(tr));
  for (const auto& tr : result.failed)
    write(dir / ("episode_" + std::to_string(tr.seed) + ".partial.csv"), episode_csv(tr));

  nlohmann::json summary{{"run_id", run_id},
                         {"instance", spec.instance},
                         {"seeds", spec.seeds},
                         {"base_seed", spec.base_seed},
                         {"completed", result.traces.size()},
                         {"errors", result.errors},
                         {"wall_seconds", result.wall_seconds}};
  if (!result.traces.empty()) {
    summary["summary"] = summary_to_json(result.summary);
    write(dir / "curves.csv", curves_csv(result.summary));
  }
  write(dir / "summary.json", summary.dump(2) + "\n");

  nlohmann::json episodes = nlohmann::json::array();
  for (std::size_t i = 0; i < result.manifests.size(); ++i)
    episodes.push_back(
        {{"seed", spec.base_seed + i}, {"config", result.configs[i]}, {"instance", result.manifests[i]}});
  const nlohmann::json manifest{{"run_id", run_id}, {"bench", spec}, {"episodes", episodes}};
  write(dir / "manifest.json", manifest.dump(2) + "\n");
  return dir;
}

}  // namespace popbo
