#include "popbo/instances.hpp"

#include "popbo/likelihood.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace popbo {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  v.back() = hi;
  return v;
}

PointList tensor_grid(const Box& domain, int per_axis) {
  PointList pts;
  if (domain.dim() == 1) {
    for (double u : linspace(domain.lo[0], domain.hi[0], per_axis)) pts.push_back(Point::Constant(1, u));
  } else if (domain.dim() == 2) {
    const auto a = linspace(domain.lo[0], domain.hi[0], per_axis);
    const auto b = linspace(domain.lo[1], domain.hi[1], per_axis);
    pts.reserve(a.size() * b.size());
    for (double u : a)
      for (double v : b) pts.push_back((Point(2) << u, v).finished());
  } else {
    throw InputError("grids are only built for d <= 2");
  }
  return pts;
}

// Grid maximum, optionally also checking extra candidate points (analytic optima).
void locate_max(GroundTruth& g, const PointList& extra = {}) {
  g.known_max = -std::numeric_limits<double>::infinity();
  auto consider = [&](const Point& x) {
    const double v = g.evaluate(x);
    if (v > g.known_max) {
      g.known_max = v;
      g.argmax = x;
    }
  };
  for (const auto& x : fine_grid(g.domain)) consider(x);
  for (const auto& x : extra)
    if (g.domain.contains(x)) consider(x);
}

nlohmann::json vector_to_json(const Vector& v) { return nlohmann::json(std::vector<double>(v.begin(), v.end())); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct KnotExpansion {
  KernelSpec kernel;
  PointList knots;
  Vector weights;
  double operator()(const Point& x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < knots.size(); ++i) s += weights[static_cast<Eigen::Index>(i)] * eval_kernel(kernel, x, knots[i]);
    return s;
  }
};

GroundTruth gp_from_parts(std::string name, const Box& domain, KnotExpansion expansion, double norm_bound,
                          nlohmann::json manifest) {
  GroundTruth g;
  g.name = std::move(name);
  g.domain = domain;
  g.kernel = expansion.kernel;
  g.norm_bound = norm_bound;
  auto shared = std::make_shared<const KnotExpansion>(std::move(expansion));
  g.evaluate = [shared](const Point& x) { return (*shared)(x); };
  g.manifest = std::move(manifest);
  locate_max(g);
  return g;
}

double beale(const Point& p) {
  const double x = p[0], y = p[1];
  const double a = 1.5 - x + x * y, b = 2.25 - x + x * y * y, c = 2.625 - x + x * y * y * y;
  return a * a + b * b + c * c;
}

double branin(const Point& p) {
  const double x = p[0], y = p[1];
  const double b = 5.1 / (4.0 * kPi * kPi), c = 5.0 / kPi, t = 1.0 / (8.0 * kPi);
  const double q = y - b * x * x + c * x - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x) + 10.0;
}

double bukin(const Point& p) {
  const double x = p[0], y = p[1];
  return 100.0 * std::sqrt(std::abs(y - 0.01 * x * x)) + 0.01 * std::abs(x + 10.0);
}

double cross_in_tray(const Point& p) {
  const double x = p[0], y = p[1];
  const double e = std::exp(std::abs(100.0 - std::hypot(x, y) / kPi));
  return -1e-4 * std::pow(std::abs(std::sin(x) * std::sin(y) * e) + 1.0, 0.1);
}

double eggholder(const Point& p) {
  const double x = p[0], y = p[1];
  return -(y + 47.0) * std::sin(std::sqrt(std::abs(x / 2.0 + y + 47.0))) -
         x * std::sin(std::sqrt(std::abs(x - (y + 47.0))));
}

double holder_table(const Point& p) {
  const double x = p[0], y = p[1];
  return -std::abs(std::sin(x) * std::cos(y) * std::exp(std::abs(1.0 - std::hypot(x, y) / kPi)));
}

double levy13(const Point& p) {
  const double x = p[0], y = p[1];
  const double s1 = std::sin(3.0 * kPi * x), s2 = std::sin(3.0 * kPi * y), s3 = std::sin(2.0 * kPi * y);
  return s1 * s1 + (x - 1.0) * (x - 1.0) * (1.0 + s2 * s2) + (y - 1.0) * (y - 1.0) * (1.0 + s3 * s3);
}

struct TestFunctionInfo {
  std::string name;
  double (*fn)(const Point&);
  double lo0, hi0, lo1, hi1;
  std::vector<std::pair<double, double>> minimizers;
};

const std::vector<TestFunctionInfo>& registry() {
  static const std::vector<TestFunctionInfo> r = {
      {"beale", beale, -4.5, 4.5, -4.5, 4.5, {{3.0, 0.5}}},
      {"branin", branin, -5.0, 10.0, 0.0, 15.0, {{-kPi, 12.275}, {kPi, 2.275}, {9.42478, 2.475}}},
      {"bukin", bukin, -15.0, -5.0, -3.0, 3.0, {{-10.0, 1.0}}},
      {"cross_in_tray", cross_in_tray, -10.0, 10.0, -10.0, 10.0,
       {{1.34941, 1.34941}, {-1.34941, 1.34941}, {1.34941, -1.34941}, {-1.34941, -1.34941}}},
      {"eggholder", eggholder, -512.0, 512.0, -512.0, 512.0, {{512.0, 404.2319}}},
      {"holder_table", holder_table, -10.0, 10.0, -10.0, 10.0,
       {{8.05502, 9.66459}, {-8.05502, 9.66459}, {8.05502, -9.66459}, {-8.05502, -9.66459}}},
      {"levy13", levy13, -10.0, 10.0, -10.0, 10.0, {{1.0, 1.0}}},
  };
  return r;
}

const TestFunctionInfo& lookup(const std::string& name) {
  for (const auto& info : registry())
    if (info.name == name) return info;
  throw InputError("unknown test function: " + name);
}

constexpr int kNormalizationGrid = 100;
constexpr double kTestFunctionBound = 6.0;

}  // namespace

PointList fine_grid(const Box& domain) { return tensor_grid(domain, domain.dim() == 1 ? 10001 : 401); }

int default_knot_count(int dim) { return dim == 1 ? 50 : 150; }

GroundTruth sample_gp_instance(Rng& rng, const KernelSpec& kernel, int n_knots, const Box& domain,
                               const GpSampleOptions& options) {
  if (n_knots < 1) throw InputError("n_knots must be at least 1");
  if (kernel.dim != domain.dim()) throw InputError("kernel and domain dimensions differ");
  const std::uint64_t seed = rng.seed();
  const std::string name = domain.dim() == 1 ? "gp-se" : "gp-se-2d";
  PointList knots(static_cast<std::size_t>(n_knots), Point(domain.dim()));
  for (auto& k : knots)
    for (int j = 0; j < domain.dim(); ++j) k[j] = rng.uniform(domain.lo[j], domain.hi[j]);
  Vector z(n_knots);
  for (int i = 0; i < n_knots; ++i) z[i] = rng.normal();

  // Draw and interpolant share one spectrum of K + eps I. The knot residual is
  // then eps * weights, at most sqrt(eps) |z| / 2, and the norm stays below |z|.
  const Matrix k = gram(kernel, knots, 0.0);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  if (eig.info() != Eigen::Success) throw NumericalError("knot Gram eigendecomposition failed");
  const Vector root = (eig.eigenvalues().cwiseMax(0.0).array() + options.sample_jitter).sqrt();
  const Vector sampled = eig.eigenvectors() * root.cwiseProduct(z);
  const Vector weights = eig.eigenvectors() * z.cwiseQuotient(root);
  const Vector values = k * weights;
  // w^T K w cancels badly for weights this large; sum z_i^2 lambda_i / (lambda_i + eps) does not.
  const Vector lambda = eig.eigenvalues().cwiseMax(0.0);
  const double norm = std::sqrt(z.cwiseAbs2().cwiseProduct(lambda.cwiseQuotient(root.cwiseAbs2())).sum());
  const double bound = options.norm_factor * norm;

  nlohmann::json knots_json = nlohmann::json::array();
  for (const auto& p : knots) knots_json.push_back(point_to_json(p));
  nlohmann::json manifest{{"type", "gp"},
                          {"name", name},
                          {"seed", seed},
                          {"kernel", kernel},
                          {"domain", box_to_json(domain)},
                          {"jitter", options.sample_jitter},
                          {"knots", knots_json},
                          {"weights", vector_to_json(weights)},
                          {"values", vector_to_json(values)},
                          {"sampled", vector_to_json(sampled)},
                          {"rkhs_norm", norm},
                          {"norm_bound", bound}};
  return gp_from_parts(name, domain, KnotExpansion{kernel, std::move(knots), weights}, bound, std::move(manifest));
}

const std::vector<std::string>& test_function_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& info : registry()) n.push_back(info.name);
    return n;
  }();
  return names;
}

double raw_test_function(const std::string& name, const Point& x) {
  if (x.size() != 2) throw InputError("test functions are two-dimensional");
  return lookup(name).fn(x);
}

Box test_function_domain(const std::string& name) {
  const auto& info = lookup(name);
  return Box((Vector(2) << info.lo0, info.lo1).finished(), (Vector(2) << info.hi0, info.hi1).finished());
}

double fit_lengthscale(const std::function<double(const Point&)>& f, const Box& domain, Rng& rng, int samples) {
  if (samples < 2) throw InputError("need at least two samples to fit a lengthscale");
  PointList xs(static_cast<std::size_t>(samples), Point(domain.dim()));
  Vector y(samples);
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < domain.dim(); ++j) xs[static_cast<std::size_t>(i)][j] = rng.uniform(domain.lo[j], domain.hi[j]);
    y[i] = f(xs[static_cast<std::size_t>(i)]);
  }
  y.array() -= y.mean();
  const double width = domain.width().mean();
  double best_l = width, best_ll = -std::numeric_limits<double>::infinity();
  constexpr int kSteps = 61;
  for (int s = 0; s < kSteps; ++s) {
    const double l = width * std::pow(10.0, -2.0 + 2.3 * s / (kSteps - 1));
    const KernelSpec spec = KernelSpec::squared_exponential(domain.dim(), 1.0, l);
    const Eigen::LLT<Matrix> llt(gram(spec, xs, 1e-4));
    if (llt.info() != Eigen::Success) continue;
    const double quad = y.dot(llt.solve(y));
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    // Profile likelihood with the signal variance maximized out.
    const double ll = -0.5 * samples * std::log(quad / samples) - 0.5 * logdet;
    if (ll > best_ll) {
      best_ll = ll;
      best_l = l;
    }
  }
  return best_l;
}

GroundTruth test_function(const std::string& name) {
  const auto& info = lookup(name);
  const Box domain = test_function_domain(name);
  const PointList grid = tensor_grid(domain, kNormalizationGrid);
  Vector raw(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) raw[static_cast<Eigen::Index>(i)] = info.fn(grid[i]);
  // population standard deviation over the grid
  const double sd = std::sqrt((raw.array() - raw.mean()).square().mean());

  GroundTruth g;
  g.name = name;
  g.domain = domain;
  auto fn = info.fn;
  g.evaluate = [fn, sd](const Point& x) { return -fn(x) / sd; };
  Rng rng = Rng(0).split("lengthscale").split(name);
  g.kernel = KernelSpec::squared_exponential(2, 1.0, fit_lengthscale(g.evaluate, domain, rng));
  g.norm_bound = kTestFunctionBound;
  PointList optima;
  for (const auto& [a, b] : info.minimizers) optima.push_back((Point(2) << a, b).finished());
  locate_max(g, optima);
  g.manifest = {{"type", "test_function"}, {"name", name}, {"scale", sd}, {"kernel", g.kernel},
                {"norm_bound", g.norm_bound}, {"domain", box_to_json(domain)}};
  return g;
}

GroundTruth comfort_synth() {
  GroundTruth g;
  g.name = "comfort_synth";
  g.domain = Box((Vector(2) << 18.0, 0.0).finished(), (Vector(2) << 30.0, 1.5).finished());
  g.evaluate = [](const Point& x) {
    const double t = x[0], v = x[1];
    const double main = std::exp(-(std::pow((t - 24.5) / 3.0, 2) + std::pow((v - 0.35) / 0.4, 2)));
    const double side = std::exp(-(std::pow((t - 27.5) / 2.0, 2) + std::pow((v - 1.1) / 0.3, 2)));
    return 2.0 * main + 1.2 * side;
  };
  Rng rng = Rng(0).split("lengthscale").split("comfort_synth");
  g.kernel = KernelSpec::squared_exponential(2, 1.0, fit_lengthscale(g.evaluate, g.domain, rng));
  g.norm_bound = kTestFunctionBound;
  locate_max(g);
  g.manifest = {{"type", "comfort_synth"}, {"name", g.name}, {"kernel", g.kernel}, {"norm_bound", g.norm_bound},
                {"domain", box_to_json(g.domain)}};
  return g;
}

bool is_known_instance(const std::string& name) {
  if (name == "gp-se" || name == "gp-se-2d" || name == "comfort_synth") return true;
  for (const auto& n : test_function_names())
    if (n == name) return true;
  return false;
}

GroundTruth make_instance(const std::string& name, std::uint64_t seed) {
  if (name == "gp-se" || name == "gp-se-2d") {
    const int d = name == "gp-se" ? 1 : 2;
    Rng rng = Rng(seed).split("instance");
    const Box domain = Box::uniform(d, 0.0, 10.0);
    return sample_gp_instance(rng, KernelSpec::squared_exponential(d, 9.0, 1.0), default_knot_count(d), domain);
  }
  if (name == "comfort_synth") return comfort_synth();
  if (!is_known_instance(name)) throw InputError("unknown instance: " + name);
  return test_function(name);
}

GroundTruth truth_from_manifest(const nlohmann::json& manifest) {
  try {
    const std::string type = manifest.at("type").get<std::string>();
    if (type == "test_function") return test_function(manifest.at("name").get<std::string>());
    if (type == "comfort_synth") return comfort_synth();
    if (type != "gp") throw InputError("unknown manifest type: " + type);
    const Box domain = box_from_json(manifest.at("domain"));
    KnotExpansion e;
    e.kernel = manifest.at("kernel").get<KernelSpec>();
    for (const auto& k : manifest.at("knots")) e.knots.push_back(point_from_json(k));
    e.weights = vector_from_json(manifest.at("weights"));
    if (static_cast<std::size_t>(e.weights.size()) != e.knots.size())
      throw InputError("manifest weights and knots differ in length");
    const double bound = manifest.at("norm_bound").get<double>();
    return gp_from_parts(manifest.at("name").get<std::string>(), domain, std::move(e), bound, manifest);
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("malformed instance manifest: ") + ex.what());
  }
}

ComparisonOracle::ComparisonOracle(GroundTruth truth, Rng rng) : truth_(std::move(truth)), rng_(std::move(rng)) {}

int ComparisonOracle::compare(const Point& x, const Point& x_prime) {
  if (!truth_.domain.contains(x, 1e-12) || !truth_.domain.contains(x_prime, 1e-12))
    throw InputError("oracle queried outside the domain");
  return sample_preference(rng_, btl_prob(truth_(x), truth_(x_prime)));
}

ComparisonOracle oracle_from_truth(const GroundTruth& truth, Rng rng) { return ComparisonOracle(truth, std::move(rng)); }

}  // namespace popbo
