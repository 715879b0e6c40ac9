#pragma once

#include <utility>

#include "subid/common.hpp"
#include "subid/model.hpp"

namespace subid {

struct HistoryProposal {
  IndelHistory history;
  double log_density = 0.0;
};

// Proposes an indel history without killing events whose replay starts at n0
// and ends at n_target.  Intermediate-region events are proposed at rate
// zeta = (N+1) lambda + N mu (deletions suppressed at N = 1), with deletion
// lengths truncated so that neither the right end region nor the last
// intermediate base is ever removed.  If the running length does not match
// n_target at the edge end, one final event of the exact missing length is
// inserted at a uniform time.  The returned density sums the forced-last-event
// and the all-natural generation routes.
HistoryProposal propose_nokill_history(int n0, int n_target, double edge_length,
                                       const EndRegions& end, const IndelParams& params,
                                       Rng& rng);

// Density of the scheme above evaluated at an arbitrary no-kill history.
// Returns -inf for histories outside the proposal's support.
double eval_nokill_density(const IndelHistory& h, int n0, double edge_length,
                           const EndRegions& end, const IndelParams& params);

// Proposes a history containing exactly one killing event, positioned last.
// Events are generated from the full-rate process; if no kill occurs before
// the edge end, one killing event is appended at a uniform residual time with
// its kind drawn proportional to the four killing-category rates.  The
// density sums the natural-kill and appended-kill routes.
HistoryProposal propose_kill_history(int n0, double edge_length, const EndRegions& end,
                                     const IndelParams& params, Rng& rng);

double eval_kill_density(const IndelHistory& h, int n0, double edge_length,
                         const EndRegions& end, const IndelParams& params);

// Re-propose an edge history preserving its kill status and (for no-kill
// histories) the child-side length.
HistoryProposal repropose_edge_history(const IndelHistory& old, int n0, int n_child,
                                       double edge_length, const EndRegions& end,
                                       const IndelParams& params, Rng& rng);
double eval_edge_history_density(const IndelHistory& h, int n0, double edge_length,
                                 const EndRegions& end, const IndelParams& params);

// Event rate used by the no-kill proposal: (N+1) lambda + N mu, with the
// deletion term dropped when no valid intermediate deletion exists (N = 1).
double nokill_proposal_rate(int n, const IndelParams& params);

// Total appended-kill categories rate: (R-2) lambda + R mu + mu (1-r)/r + N mu.
double kill_append_rate(const EndRegions& end, int n, const IndelParams& params);

// One event of the full-rate process at current length n: kind chosen
// proportional to its category rate, position uniform within the category,
// length geometric.  The event time is left at 0 for the caller to fill.
IndelEvent sample_process_event(int n, const EndRegions& end, const IndelParams& params,
                                Rng& rng);

// Symmetric geometric random-walk step over the integers with support >= lo.
// Used by length-changing moves; pmf is available for Hastings ratios.
int sample_length_walk(int current, int lo, double step_r, Rng& rng);
double length_walk_logpmf(int proposed, int current, int lo, double step_r);

}  // namespace subid
