#include "subid/kernels.hpp"

#include <bit>
#include <cmath>

namespace subid {

namespace {

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

constexpr double kFourBaseMiss = 1.0 - 1.0 / 256.0;    // 1 - 4^-4
constexpr double kSixBaseMiss = 1.0 - 1.0 / 4096.0;    // 1 - 4^-6

}  // namespace

double mismatch_p(double t) {
  SUBID_REQUIRE(t >= 0.0, "time must be nonnegative");
  return 0.75 * (1.0 - std::exp(-4.0 / 3.0 * SubstitutionClock::u * t));
}

double mismatch_entry(int r, double t, int i, int j) {
  SUBID_REQUIRE(r >= 1, "end-region length must be >= 1");
  SUBID_REQUIRE(i >= 0 && i <= r && j >= 0 && j <= r, "state out of range");
  const double p = mismatch_p(t);
  if (p == 0.0) return i == j ? 1.0 : 0.0;
  // log-space sum over k = number of mismatches reverting to matches
  const double lp = std::log(p);
  const double l1p = std::log1p(-p);
  const double lp3 = std::log(p / 3.0);
  const double l1p3 = std::log1p(-p / 3.0);
  double acc = kNegInf;
  const int k_lo = std::max(0, i - j);
  const int k_hi = std::min(i, r - j);
  for (int k = k_lo; k <= k_hi; ++k) {
    const int gains = j - i + k;  // matches that become mismatches
    const double term = log_binom(r - i, gains) + gains * lp + (r - j - k) * l1p +
                        log_binom(i, k) + k * lp3 + (i - k) * l1p3;
    acc = log_sum_exp(acc, term);
  }
  const double v = std::exp(acc);
  return v < 1e-300 ? 0.0 : v;
}

MismatchMatrix mismatch_matrix(int r, double t) {
  MismatchMatrix m;
  m.r = r;
  m.t = t;
  m.p = mismatch_p(t);
  m.entries.resize((r + 1) * (r + 1));
  for (int i = 0; i <= r; ++i)
    for (int j = 0; j <= r; ++j) m.entries[i * (r + 1) + j] = mismatch_entry(r, t, i, j);
  return m;
}

std::vector<double> mismatch_stationary(int r) {
  SUBID_REQUIRE(r >= 1, "end-region length must be >= 1");
  std::vector<double> pi(r + 1);
  const double l3 = std::log(3.0);
  const double l4 = std::log(4.0);
  for (int i = 0; i <= r; ++i) pi[i] = std::exp(log_binom(r, i) + i * l3 - r * l4);
  return pi;
}

double cutter_stationary(int n) {
  SUBID_REQUIRE(n >= 1, "intermediate length must be >= 1");
  const int e4 = std::max(n - 3, 0);
  const int e6 = std::max(n - 5, 0);
  return std::pow(kFourBaseMiss, e4) * std::pow(kSixBaseMiss, e6);
}

double cutter_rate01(int n) {
  SUBID_REQUIRE(n >= 1, "intermediate length must be >= 1");
  const double u = SubstitutionClock::u;
  return 4.0 * std::max(n - 3, 0) * u / 255.0 + 6.0 * std::max(n - 5, 0) * u / 4095.0;
}

CutterKernel cutter_matrix(double t, int n) {
  SUBID_REQUIRE(t >= 0.0, "time must be nonnegative");
  SUBID_REQUIRE(n >= 1, "intermediate length must be >= 1");
  CutterKernel k;
  k.n = n;
  k.pi0 = cutter_stationary(n);
  k.q01 = cutter_rate01(n);
  if (n <= 3) {
    // No room for either recognition motif: pi0 = 1 and the relaxation rate
    // q01/(1-pi0) is a 0/0 limit; treat any cutter as vanishing immediately.
    k.eta_t = t == 0.0 ? 1.0 : 0.0;
    k.entries = {1.0, 0.0, t == 0.0 ? 0.0 : 1.0, t == 0.0 ? 1.0 : 0.0};
    return k;
  }
  const double relax = k.q01 * SubstitutionClock::u / (1.0 - k.pi0);
  k.eta_t = std::exp(-relax * t);
  const double pi0 = k.pi0;
  const double eta = k.eta_t;
  k.entries = {pi0 + (1.0 - pi0) * eta, (1.0 - pi0) * (1.0 - eta),
               pi0 * (1.0 - eta), 1.0 - pi0 * (1.0 - eta)};
  return k;
}

double cutter_entry(double t, int n, int zi, int zj) {
  return cutter_matrix(t, n)(zi, zj);
}

CutterKernel cutter_matrix_given_history(const IndelHistory& h, double edge_length,
                                         int n_parent, const EndRegions& end) {
  SUBID_REQUIRE(!h.has_kill(), "cutter kernel undefined for killing histories");
  const std::vector<int> lengths = replay_history(h, n_parent, end, edge_length);
  CutterKernel acc = cutter_matrix(
      h.events.empty() ? edge_length : h.events.front().time, n_parent);
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const double t1 = h.events[i].time;
    const double t2 = i + 1 < h.events.size() ? h.events[i + 1].time : edge_length;
    const CutterKernel seg = cutter_matrix(t2 - t1, lengths[i + 1]);
    std::array<double, 4> prod;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        prod[a * 2 + b] = acc(a, 0) * seg(0, b) + acc(a, 1) * seg(1, b);
    acc.entries = prod;
  }
  acc.n = n_parent;
  return acc;
}

double cutter_entry_given_history(const IndelHistory& h, double edge_length,
                                  int n_parent, const EndRegions& end, int zi,
                                  int zj) {
  if (h.events.empty()) return cutter_entry(edge_length, n_parent, zi, zj);
  return cutter_matrix_given_history(h, edge_length, n_parent, end)(zi, zj);
}

const MismatchMatrix& MismatchCache::get(int r, double t) {
  if (cache_.size() > 4096) cache_.clear();
  const Key key{r, std::bit_cast<std::uint64_t>(t)};
  auto it = cache_.find(key);
  if (it == cache_.end()) it = cache_.emplace(key, mismatch_matrix(r, t)).first;
  return it->second;
}

}  // namespace subid
