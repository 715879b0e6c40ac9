#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "subid/common.hpp"

namespace subid {

// AFLP production scheme: EcoRI (6-base) + MseI (4-base) restriction sites,
// three selective bases per primer, and the fixed primer overhead that turns
// an intermediate-region length N into a measured marker length N + 39.
struct EnzymeScheme {
  std::string rare_site = "GAATTC";
  std::string frequent_site = "TTAA";
  int selective_bases_per_primer = 3;
  int primer_overhead = 39;
};

constexpr int kMarkerLengthOffset = 39;

// Lengths of the left/right end regions (restriction site + selective bases).
// Valid values are (7,9), (9,7) and (9,9).
struct EndRegions {
  int r_left = 7;
  int r_right = 9;

  int total() const { return r_left + r_right; }
  bool valid() const {
    return (r_left == 7 && r_right == 9) || (r_left == 9 && r_right == 7) ||
           (r_left == 9 && r_right == 9);
  }
};

// Indel process parameters: per-link insertion rate lambda, deletion rate mu,
// geometric length parameter r (mean length 1/r).  beta = lambda/mu is the
// prior parametrization; lambda is always the value used in rate formulas.
struct IndelParams {
  double lambda = 0.0;
  double mu = 0.0;
  double r_geom = 0.5;
  double beta = 0.0;  // set when parametrized as lambda = mu * beta

  static IndelParams from_mu_beta(double mu, double beta, double r) {
    IndelParams p;
    SUBID_REQUIRE(mu >= 0.0 && beta >= 0.0, "mu and beta must be nonnegative");
    SUBID_REQUIRE(r > 0.0 && r <= 1.0, "r must lie in (0, 1]");
    p.mu = mu;
    p.beta = beta;
    p.lambda = mu * beta;
    p.r_geom = r;
    return p;
  }
};

// Substitution clock; time is measured in expected substitutions per site.
struct SubstitutionClock {
  static constexpr double u = 1.0;
};

// Event types from the single-lineage indel process.  Killing kinds destroy
// an end region and permanently silence the locus in that lineage.
enum class EventKind : std::uint8_t {
  insertion,                // 1    insertion starting in the intermediate region
  insertion_end,            // 1_R  insertion starting within the end regions
  deletion,                 // -1   intermediate deletion, right end untouched
  deletion_into_right_end,  // -1_N intermediate deletion removing right-end bases
  deletion_from_before,     // -1_P deletion starting before the fragment
  deletion_in_end           // -1_R deletion starting within the end regions
};

bool is_killing(EventKind k);
bool is_insertion(EventKind k);
const char* kind_name(EventKind k);

// One indel event: elapsed time from the parent node, kind, starting link and
// length in bases.  Link positions follow the fragment-absolute convention:
// position 0 is the link immediately before the fragment, intermediate-region
// links are R_L .. R_L + N.  Positions of deletion_from_before events are the
// negative start index; end-region event positions never enter any density.
struct IndelEvent {
  double time = 0.0;
  EventKind kind = EventKind::insertion;
  int position = 0;
  int length = 1;
};

// Ordered event list along one edge.  At most one killing event is allowed
// and it must be last.
struct IndelHistory {
  std::vector<IndelEvent> events;

  bool has_kill() const {
    return !events.empty() && is_killing(events.back().kind);
  }
  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

// Augmented per-fragment substitution state.
struct FragmentState {
  int mismatches = 0;        // M in 0..R
  int cutters = 0;           // Z in {0,1}
  int intermediate_length = 1;  // N >= 1
};

// Longest deletion at intermediate link s (absolute position) that does not
// remove right-end bases and leaves at least one intermediate base.
inline int max_nonkill_deletion(const EndRegions& end, int n, int s) {
  return std::min(end.r_left + n - s, n - 1);
}

// eta: total rate of indel events affecting the fragment,
// (R_L + R_R + N - 1) lambda + (R_L + R_R + N + (1-r)/r) mu.
double total_indel_rate(const EndRegions& end, int n, const IndelParams& params);

// mu (1-r)/r: rate of long deletions starting before the fragment that
// remove at least one base of the left end region.
double long_deletion_rate(const IndelParams& params);

// log pmf of the geometric length distribution on {1, 2, ...}, mean 1/r.
double indel_length_logpmf(int l, double r);

// log pmf of the geometric truncated at n: r(1-r)^{l-1} / (1 - (1-r)^n).
double trunc_geometric_logpmf(int l, double r, int n);

// Samplers for the two length distributions.
int sample_geometric(Rng& rng, double r);
int sample_trunc_geometric(Rng& rng, double r, int n);

// Replays a history from the parent-node intermediate length.  Returns the
// per-event lengths N_0..N_k (N_i after event i).  Throws on unsorted times,
// invalid positions/lengths, kinds inconsistent with position+length, a
// non-final killing event, or any prefix driving N below 1.
std::vector<int> replay_history(const IndelHistory& h, int n0,
                                const EndRegions& end, double edge_length);

// Validity probe with the same rules as replay_history.
bool history_valid(const IndelHistory& h, int n0, const EndRegions& end,
                   double edge_length);

}  // namespace subid
