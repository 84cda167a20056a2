#ifndef POPBO_PREFERENCE_HPP
#define POPBO_PREFERENCE_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace popbo {

/// Seedable generator with deterministic sub-streams. Every stochastic routine
/// takes one explicitly; a stream must not be shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream derived from (seed, tag); does not advance *this.
  Rng split(std::string_view tag) const;
  Rng split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }

  double uniform();                     // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();
  std::uint64_t below(std::uint64_t n);  // [0, n)

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Numerically stable logistic 1 / (1 + e^-u).
double logistic(double u);

/// log(logistic(u)) without overflow.
double log_logistic(double u);

/// Probability that the point with value y beats the point with value y_prime.
double btl_prob(double y, double y_prime);

/// Bernoulli(p) draw; throws InputError for p outside [0, 1].
int sample_preference(Rng& rng, double p);

/// Bounds on the logistic link over value differences in [-2B, 2B].
struct LinkConstants {
  double sigma_lo;
  double sigma_hi;
  double dsigma_lo;
  double dsigma_hi;
  double b_p;
  double h_sigma;
  double c_l;
};

LinkConstants link_constants(double norm_bound);

}  // namespace popbo

#endif
