#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace subid {

using Rng = std::mt19937_64;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Input/parse failures (CLI exit code 2).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-recoverable numeric failures (CLI exit code 3).
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double sq(double x) { return x * x; }

inline double runif(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double runif(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int runif_int(Rng& rng, int lo, int hi) {  // inclusive bounds
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double rexp(Rng& rng, double rate) {
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return std::exponential_distribution<double>(rate)(rng);
}

#define SUBID_CHECK(cond, msg)                                        \
  do {                                                                \
    if (!(cond)) throw std::logic_error(std::string("internal: ") + (msg)); \
  } while (0)

#define SUBID_REQUIRE(cond, msg)                                      \
  do {                                                                \
    if (!(cond)) throw std::invalid_argument(msg);                    \
  } while (0)

}  // namespace subid
