#include "popbo/preference.hpp"

#include "popbo/types.hpp"

#include <cmath>

namespace popbo {

namespace {

// FNV-1a; std::hash is not stable across standard libraries.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return std::mt19937_64(seq);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed ^ (tag + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(make_engine(seed, 0)) {}

Rng Rng::split(std::string_view tag) const { return Rng(mix(seed_, fnv1a(tag))); }

Rng Rng::split(std::uint64_t index) const { return Rng(mix(seed_, index)); }

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

std::uint64_t Rng::below(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

double logistic(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double log_logistic(double u) {
  if (u >= 0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

double btl_prob(double y, double y_prime) { return logistic(y - y_prime); }

int sample_preference(Rng& rng, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("preference probability must lie in [0, 1]");
  return rng.uniform() < p ? 1 : 0;
}

LinkConstants link_constants(double norm_bound) {
  const double b2 = 2.0 * norm_bound;
  LinkConstants c{};
  c.sigma_lo = logistic(-b2);
  c.sigma_hi = logistic(b2);
  c.dsigma_lo = 1.0 / (2.0 + std::exp(b2) + std::exp(-b2));
  c.dsigma_hi = 0.25;
  c.b_p = c.sigma_hi / c.sigma_lo - c.sigma_lo / c.sigma_hi;
  c.h_sigma = 1.0 / (2.0 * c.sigma_hi * c.sigma_hi);
  c.c_l = 1.0 + 2.0 / (1.0 + std::exp(-b2));
  return c;
}

}  // namespace popbo
