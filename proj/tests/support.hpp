// Shared fixtures for the unit and acceptance suites.
#ifndef POPBO_TESTS_SUPPORT_HPP
#define POPBO_TESTS_SUPPORT_HPP

#include "oracles.hpp"

#include "popbo/likelihood.hpp"
#include "popbo/preference.hpp"
#include "popbo/solver.hpp"

namespace support {

struct SmallInstance {
  popbo::History history;
  popbo::KernelSpec kernel;
  double bound = 1.0;
  double jitter = 1e-6;
  oracle::Problem problem;  // same data in oracle form
};

// Random 1-D history of length t on [0, 5] with random outcomes, SE kernel and B.
inline SmallInstance random_small_instance(popbo::Rng& rng, std::size_t t) {
  SmallInstance s;
  const double variance = rng.uniform() < 0.5 ? 1.0 : 9.0;
  const double lengthscale = rng.uniform(0.5, 2.0);
  s.kernel = popbo::KernelSpec::squared_exponential(1, variance, lengthscale);
  s.bound = rng.uniform(0.5, 3.0);
  s.history = popbo::History(popbo::Point::Constant(1, rng.uniform(0.0, 5.0)));
  for (std::size_t i = 0; i < t; ++i) {
    const int pref = rng.uniform() < 0.5 ? 1 : 0;
    s.history.append(popbo::Point::Constant(1, rng.uniform(0.0, 5.0)), pref);
  }
  for (const auto& p : s.history.points()) s.problem.points.push_back(p[0]);
  s.problem.outcomes = s.history.outcomes();
  s.problem.variance = variance;
  s.problem.lengthscale = lengthscale;
  s.problem.bound = s.bound;
  s.problem.jitter = s.jitter;
  return s;
}

}  // namespace support

#endif
