#pragma once

#include <array>
#include <unordered_map>
#include <vector>

#include "subid/common.hpp"
#include "subid/model.hpp"

namespace subid {

// Transition matrix for the mismatch count M(t) over r end-region sites under
// the Jukes-Cantor clock.  Entry (i,j) sums products of two binomial terms
// over the number of current mismatches that revert.
struct MismatchMatrix {
  int r = 0;
  double t = 0.0;
  double p = 0.0;  // per-site mismatch probability (3/4)(1 - e^{-4ut/3})
  std::vector<double> entries;  // (r+1) x (r+1), row major

  double operator()(int i, int j) const { return entries[i * (r + 1) + j]; }
};

// 2x2 transition matrix for the cutter indicator Z(t) at intermediate length n.
struct CutterKernel {
  int n = 0;
  double pi0 = 1.0;
  double q01 = 0.0;
  double eta_t = 1.0;
  std::array<double, 4> entries{1.0, 0.0, 0.0, 1.0};  // row major

  double operator()(int i, int j) const { return entries[i * 2 + j]; }
};

double mismatch_p(double t);

// Single entry of the mismatch matrix, computed in log space.
double mismatch_entry(int r, double t, int i, int j);

MismatchMatrix mismatch_matrix(int r, double t);

// Stationary distribution: pi_i = C(r,i) 3^i / 4^r.
std::vector<double> mismatch_stationary(int r);

// Stationary probability of no cutters among n intermediate bases,
// (1 - 4^-4)^{max(n-3,0)} (1 - 4^-6)^{max(n-5,0)}.
double cutter_stationary(int n);

// Rate of moving from zero to at least one cutter,
// 4 max(n-3,0) u / (4^4 - 1) + 6 max(n-5,0) u / (4^6 - 1).
double cutter_rate01(int n);

CutterKernel cutter_matrix(double t, int n);

// Cutter transition entry across an interval of constant length n.
double cutter_entry(double t, int n, int zi, int zj);

// Transition probability of Z across a whole edge, conditioned on the indel
// history: ordered product of constant-length kernels over the inter-event
// intervals.  Rejects killing histories.
CutterKernel cutter_matrix_given_history(const IndelHistory& h, double edge_length,
                                         int n_parent, const EndRegions& end);

double cutter_entry_given_history(const IndelHistory& h, double edge_length,
                                  int n_parent, const EndRegions& end, int zi,
                                  int zj);

// Per-chain memo of mismatch matrices keyed by (r, t).  Not thread-safe;
// give each worker its own instance.
class MismatchCache {
 public:
  const MismatchMatrix& get(int r, double t);
  void clear() { cache_.clear(); }
  std::size_t size() const { return cache_.size(); }

 private:
  struct Key {
    int r;
    std::uint64_t t_bits;
    bool operator==(const Key& o) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<std::uint64_t>()(k.t_bits * 31 + static_cast<std::uint64_t>(k.r));
    }
  };
  std::unordered_map<Key, MismatchMatrix, KeyHash> cache_;
};

}  // namespace subid
