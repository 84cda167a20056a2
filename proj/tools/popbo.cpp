#include "popbo/bench.hpp"
#include "popbo/instances.hpp"
#include "popbo/service.hpp"
#include "popbo/session.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace popbo;

// "se:variance=1,lengthscale=0.5", "matern:nu=2.5,rho=1", "linear"
KernelSpec parse_kernel(const std::string& text, int dim) {
  const auto colon = text.find(':');
  const KernelFamily family = kernel_family_from_string(text.substr(0, colon));
  KernelSpec spec = family == KernelFamily::Linear      ? KernelSpec::linear(dim)
                    : family == KernelFamily::SquaredExponential ? KernelSpec::squared_exponential(dim, 1.0, 1.0)
                                                         : KernelSpec::matern(dim, 2.5, 1.0);
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InputError("kernel parameter must be key=value: " + item);
      const std::string key = item.substr(0, eq);
      double value = 0.0;
      try {
        value = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw InputError("kernel parameter is not a number: " + item);
      }
      if (key == "variance") spec.variance = value;
      else if (key == "lengthscale") spec.lengthscale = value;
      else if (key == "nu") spec.nu = value;
      else if (key == "rho") spec.rho = value;
      else throw InputError("unknown kernel parameter: " + key);
    }
  }
  spec.validate();
  return spec;
}

std::uint64_t base_seed(std::uint64_t flag_value) {
  if (const char* env = std::getenv("POPBO_SEED"); env && *env) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InputError(std::string("POPBO_SEED is not an unsigned integer: ") + env);
    }
  }
  return flag_value;
}

std::string describe(const Point& x, const PopBoConfig& c) {
  std::ostringstream os;
  os << std::setprecision(4);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (j) os << ", ";
    if (static_cast<std::size_t>(j) < c.labels.size()) {
      const auto& l = c.labels[static_cast<std::size_t>(j)];
      os << l.name << ' ' << x[j];
      if (!l.unit.empty()) os << ' ' << l.unit;
    } else {
      os << "x" << j + 1 << " = " << x[j];
    }
  }
  return os.str();
}

void save(const Session& s, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw InputError("cannot write checkpoint " + tmp);
    os << s.checkpoint().dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

struct BenchArgs {
  std::string instance = "gp-se";
  std::size_t seeds = 30;
  std::size_t horizon = 30;
  std::uint64_t seed = 0;
  double beta0 = 1.0;
  double lambda = 1.0;
  double jitter = 1e-6;
  std::optional<double> norm_bound;
  std::string kernel;
  std::string out_dir = ".";
  std::string run_id;
  bool serial = false;
  bool adapt = false;
  bool no_max_mle = false;
};

int cmd_bench(const BenchArgs& a) {
  if (!is_known_instance(a.instance)) {
    std::cerr << "error: unknown instance '" << a.instance << "'\n";
    return 2;
  }
  BenchSpec spec;
  spec.instance = a.instance;
  spec.seeds = a.seeds;
  spec.horizon = a.horizon;
  spec.base_seed = base_seed(a.seed);
  spec.beta0 = a.beta0;
  spec.lambda = a.lambda;
  spec.jitter = a.jitter;
  spec.norm_bound = a.norm_bound;
  spec.adapt_norm_bound = a.adapt;
  spec.episode.track_max_mle = !a.no_max_mle;
  if (!a.kernel.empty()) {
    const int dim = make_instance(a.instance, spec.base_seed).domain.dim();
    spec.kernel = parse_kernel(a.kernel, dim);
  }
  const std::string run_id = a.run_id.empty() ? a.instance + "_s" + std::to_string(spec.base_seed) + "_n" +
                                                    std::to_string(a.seeds) + "_T" + std::to_string(a.horizon)
                                              : a.run_id;
  const BenchResult result = run_bench(spec, a.serial ? Execution::Serial : Execution::Parallel);
  const auto dir = write_bench_outputs(a.out_dir, run_id, spec, result);
  std::cout << "wrote " << dir.string() << " (" << result.traces.size() << "/" << a.seeds << " episodes, "
            << std::fixed << std::setprecision(1) << result.wall_seconds << " s)\n";
  if (!result.traces.empty()) {
    const Summary& s = result.summary;
    std::cout << std::setprecision(4) << "final reported suboptimality (t*): " << s.report_subopt.mean.back()
              << " +- " << s.report_subopt.std.back() << "\n"
              << "final reported suboptimality (max-MLE): " << s.mle_subopt.mean.back() << " +- "
              << s.mle_subopt.std.back() << "\n"
              << "final cumulative regret: " << s.cum_regret.mean.back() << " +- " << s.cum_regret.std.back()
              << "\n";
  }
  for (const auto& e : result.errors) std::cerr << "error: " << e << '\n';
  return result.errors.empty() ? 0 : 1;
}

struct InteractiveArgs {
  std::string config;
  std::string instance = "comfort_synth";
  std::string checkpoint = "popbo_session.json";
  std::size_t horizon = 20;
  std::uint64_t seed = 0;
  bool serial = false;
};

int cmd_interactive(const InteractiveArgs& a, std::istream& in, std::ostream& out) {
  const Execution exec = a.serial ? Execution::Serial : Execution::Parallel;
  std::optional<Session> session;
  if (std::filesystem::exists(a.checkpoint)) {
    std::ifstream is(a.checkpoint);
    session.emplace(Session::restore(nlohmann::json::parse(is), exec));
    out << "resumed " << a.checkpoint << " at step " << session->step() + 1 << "\n";
  } else {
    PopBoConfig config;
    if (!a.config.empty()) {
      std::ifstream is(a.config);
      if (!is) throw InputError("cannot read config " + a.config);
      config = nlohmann::json::parse(is).get<PopBoConfig>();
    } else {
      if (!is_known_instance(a.instance)) throw InputError("unknown instance: " + a.instance);
      const GroundTruth truth = make_instance(a.instance, a.seed);
      config.kernel = truth.kernel;
      config.domain = truth.domain;
      config.norm_bound = truth.norm_bound;
      config.x0 = 0.5 * (truth.domain.lo + truth.domain.hi);
      config.seed = base_seed(a.seed);
      if (a.instance == "comfort_synth") config.labels = {{"Temperature", "degC"}, {"Air speed", "m/s"}};
    }
    session.emplace(std::move(config), exec);
  }

  while (session->step() < a.horizon) {
    if (!session->pending()) session->next_query();
    const auto& q = *session->pending();
    const std::size_t t = session->step() + 1;
    int pref = -1;
    while (pref < 0) {
      out << "\nstep " << t << "\n  [1] " << describe(q.x, session->config()) << "\n  [2] "
          << describe(q.x_prime, session->config()) << "\nwhich is better? (1/2): " << std::flush;
      std::string line;
      if (!std::getline(in, line)) {
        save(*session, a.checkpoint);
        out << "\ncheckpoint saved to " << a.checkpoint << "\n";
        return 0;
      }
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (line == "1") pref = 1;
      else if (line == "2") pref = 0;
      else out << "please answer 1 or 2\n";
    }
    session->observe(pref);
    save(*session, a.checkpoint);
    const ReportedSolution r = session->report_t_star();
    out << "current recommendation (step " << r.t_star << "): " << describe(r.x, session->config())
        << "  radius " << std::setprecision(4) << r.radius << "\n";
  }
  out << "horizon reached; checkpoint saved to " << a.checkpoint << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preferential Bayesian optimization with likelihood-ratio confidence sets"};
  app.require_subcommand(1);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "run simulated episodes and write runs/<run_id>/");
  bench->add_option("--instance", ba.instance, "gp-se, gp-se-2d, comfort_synth or a test function name");
  bench->add_option("--seeds", ba.seeds, "number of episodes")->check(CLI::PositiveNumber);
  bench->add_option("--horizon", ba.horizon, "duels per episode")->check(CLI::PositiveNumber);
  bench->add_option("--seed", ba.seed, "base seed (POPBO_SEED overrides)");
  bench->add_option("--beta0", ba.beta0, "confidence width scale")->check(CLI::PositiveNumber);
  bench->add_option("--lambda", ba.lambda, "duel-kernel regularizer")->check(CLI::PositiveNumber);
  bench->add_option("--jitter", ba.jitter, "Gram jitter")->check(CLI::PositiveNumber);
  bench->add_option("--norm-bound", ba.norm_bound, "RKHS norm bound B (default: instance value)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--kernel", ba.kernel, "e.g. se:variance=1,lengthscale=0.5 (default: instance kernel)");
  bench->add_option("--out-dir", ba.out_dir, "output root");
  bench->add_option("--run-id", ba.run_id, "run directory name");
  bench->add_flag("--serial", ba.serial, "run episodes on one thread");
  bench->add_flag("--adapt-norm-bound", ba.adapt, "enable B doubling");
  bench->add_flag("--no-max-mle", ba.no_max_mle, "skip the per-step max-MLE report");

  InteractiveArgs ia;
  auto* inter = app.add_subcommand("interactive", "answer duels on the terminal");
  inter->add_option("--config", ia.config, "session config JSON file");
  inter->add_option("--instance", ia.instance, "instance supplying domain and kernel when no config is given");
  inter->add_option("--checkpoint", ia.checkpoint, "checkpoint file (resumed when it exists)");
  inter->add_option("--horizon", ia.horizon, "stop after this many answers")->check(CLI::PositiveNumber);
  inter->add_option("--seed", ia.seed, "session seed (POPBO_SEED overrides)");
  inter->add_flag("--serial", ia.serial, "single-threaded candidate search");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string checkpoint_dir;
  auto* srv = app.add_subcommand("serve", "HTTP/JSON session service under /v1");
  srv->add_option("--host", host, "bind address");
  srv->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  srv->add_option("--checkpoint-dir", checkpoint_dir, "persist sessions here and reload them on start");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) return cmd_bench(ba);
    if (*inter) return cmd_interactive(ia, std::cin, std::cout);
    if (*srv) {
      ServiceOptions opts;
      if (!checkpoint_dir.empty()) opts.checkpoint_dir = checkpoint_dir;
      SessionService service(opts);
      const std::size_t n = service.load_checkpoints();
      std::cout << "loaded " << n << " session(s); listening on " << host << ':' << port << std::endl;
      serve(service, host, port);
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
