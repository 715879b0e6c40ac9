#include "subid/proposals.hpp"

#include <cmath>

namespace subid {

namespace {

double log_geom(int l, double r) { return indel_length_logpmf(l, r); }

// Natural-generation density factor of one no-kill event (waiting term excluded).
double nokill_event_logfactor(const IndelEvent& ev, int n_before, const EndRegions& end,
                              const IndelParams& p) {
  if (ev.kind == EventKind::insertion) return std::log(p.lambda) + log_geom(ev.length, p.r_geom);
  // intermediate deletion with truncated length
  if (n_before < 2) return kNegInf;  // deletions suppressed at N = 1
  const int bound = max_nonkill_deletion(end, n_before, ev.position);
  return std::log(p.mu) + trunc_geometric_logpmf(ev.length, p.r_geom, bound);
}

// Full-process density factor of one event (waiting term excluded): every
// event contributes (lambda or mu) g(l) regardless of kind.
double process_event_logfactor(const IndelEvent& ev, const IndelParams& p) {
  const double rate = is_insertion(ev.kind) ? p.lambda : p.mu;
  return std::log(rate) + log_geom(ev.length, p.r_geom);
}

int sample_end_insertion_position(const EndRegions& end, int n, Rng& rng) {
  // interior end-region links: {1..R_L-1} and {R_L+n+1..R_L+n+R_R-1}
  const int idx = runif_int(rng, 0, end.total() - 3);
  if (idx < end.r_left - 1) return 1 + idx;
  return end.r_left + n + 1 + (idx - (end.r_left - 1));
}

int sample_end_deletion_position(const EndRegions& end, int n, Rng& rng) {
  // links whose next base is in an end region: {0..R_L-1} and {R_L+n..R_L+n+R_R-1}
  const int idx = runif_int(rng, 0, end.total() - 1);
  if (idx < end.r_left) return idx;
  return end.r_left + n + (idx - end.r_left);
}

}  // namespace

double nokill_proposal_rate(int n, const IndelParams& params) {
  double zeta = (n + 1) * params.lambda;
  if (n >= 2) zeta += n * params.mu;
  return zeta;
}

double kill_append_rate(const EndRegions& end, int n, const IndelParams& params) {
  return (end.total() - 2) * params.lambda + end.total() * params.mu +
         long_deletion_rate(params) + n * params.mu;
}

HistoryProposal propose_nokill_history(int n0, int n_target, double edge_length,
                                       const EndRegions& end, const IndelParams& params,
                                       Rng& rng) {
  SUBID_REQUIRE(n0 >= 1 && n_target >= 1, "lengths must be >= 1");
  SUBID_REQUIRE(edge_length > 0.0, "edge length must be positive");
  IndelHistory h;
  int n = n0;
  double t = 0.0;
  for (;;) {
    const double zeta = nokill_proposal_rate(n, params);
    const double dt = rexp(rng, zeta);
    if (t + dt >= edge_length) break;
    t += dt;
    IndelEvent ev;
    ev.time = t;
    if (runif(rng) * zeta < (n + 1) * params.lambda) {
      ev.kind = EventKind::insertion;
      ev.position = runif_int(rng, end.r_left, end.r_left + n);
      ev.length = sample_geometric(rng, params.r_geom);
      n += ev.length;
    } else {
      ev.kind = EventKind::deletion;
      ev.position = runif_int(rng, end.r_left, end.r_left + n - 1);
      const int bound = max_nonkill_deletion(end, n, ev.position);
      ev.length = sample_trunc_geometric(rng, params.r_geom, bound);
      n -= ev.length;
    }
    h.events.push_back(ev);
  }
  if (n != n_target) {
    IndelEvent ev;
    ev.time = runif(rng, t, edge_length);
    if (n < n_target) {
      ev.kind = EventKind::insertion;
      ev.length = n_target - n;
      ev.position = runif_int(rng, end.r_left, end.r_left + n);
    } else {
      ev.kind = EventKind::deletion;
      ev.length = n - n_target;
      ev.position = runif_int(rng, end.r_left, end.r_left + n_target);
    }
    h.events.push_back(ev);
  }
  return {h, eval_nokill_density(h, n0, edge_length, end, params)};
}

double eval_nokill_density(const IndelHistory& h, int n0, double edge_length,
                           const EndRegions& end, const IndelParams& params) {
  SUBID_REQUIRE(!h.has_kill(), "no-kill density evaluated on a killing history");
  const std::vector<int> lengths = replay_history(h, n0, end, edge_length);
  const std::size_t k = h.events.size();

  // all-natural route, including the event-free tail
  double natural = 0.0;
  double t_prev = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    natural -= nokill_proposal_rate(lengths[i], params) * (h.events[i].time - t_prev);
    natural += nokill_event_logfactor(h.events[i], lengths[i], end, params);
    t_prev = h.events[i].time;
  }
  natural -= nokill_proposal_rate(lengths[k], params) * (edge_length - t_prev);
  if (k == 0) return natural;

  // forced-last-event route: natural prefix, no event after t_{k-1}, uniform
  // time for the matching event, uniform position, deterministic length
  double forced = 0.0;
  t_prev = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    forced -= nokill_proposal_rate(lengths[i], params) * (h.events[i].time - t_prev);
    forced += nokill_event_logfactor(h.events[i], lengths[i], end, params);
    t_prev = h.events[i].time;
  }
  forced -= nokill_proposal_rate(lengths[k - 1], params) * (edge_length - t_prev);
  forced -= std::log(edge_length - t_prev);
  const IndelEvent& last = h.events[k - 1];
  if (last.kind == EventKind::insertion)
    forced -= std::log(lengths[k - 1] + 1.0);
  else
    forced -= std::log(lengths[k] + 1.0);
  return log_sum_exp(natural, forced);
}

IndelEvent sample_process_event(int n, const EndRegions& end, const IndelParams& params,
                                Rng& rng) {
  const double total = total_indel_rate(end, n, params);
  double u = runif(rng) * total;
  IndelEvent ev;
  const double ins_mid = (n + 1) * params.lambda;
  const double ins_end = (end.total() - 2) * params.lambda;
  const double del_mid = n * params.mu;
  const double del_end = end.total() * params.mu;
  if (u < ins_mid) {
    ev.kind = EventKind::insertion;
    ev.position = runif_int(rng, end.r_left, end.r_left + n);
    ev.length = sample_geometric(rng, params.r_geom);
    return ev;
  }
  u -= ins_mid;
  if (u < ins_end) {
    ev.kind = EventKind::insertion_end;
    ev.position = sample_end_insertion_position(end, n, rng);
    ev.length = sample_geometric(rng, params.r_geom);
    return ev;
  }
  u -= ins_end;
  if (u < del_mid) {
    ev.position = runif_int(rng, end.r_left, end.r_left + n - 1);
    ev.length = sample_geometric(rng, params.r_geom);
    ev.kind = ev.length <= max_nonkill_deletion(end, n, ev.position)
                  ? EventKind::deletion
                  : EventKind::deletion_into_right_end;
    return ev;
  }
  u -= del_mid;
  if (u < del_end) {
    ev.kind = EventKind::deletion_in_end;
    ev.position = sample_end_deletion_position(end, n, rng);
    ev.length = sample_geometric(rng, params.r_geom);
    return ev;
  }
  ev.kind = EventKind::deletion_from_before;
  const int i = sample_geometric(rng, params.r_geom);
  ev.position = -i;
  ev.length = i + sample_geometric(rng, params.r_geom);
  return ev;
}

HistoryProposal propose_kill_history(int n0, double edge_length, const EndRegions& end,
                                     const IndelParams& params, Rng& rng) {
  SUBID_REQUIRE(n0 >= 1, "length must be >= 1");
  SUBID_REQUIRE(edge_length > 0.0, "edge length must be positive");
  SUBID_REQUIRE(params.lambda > 0.0 || params.mu > 0.0,
                "killing histories require a positive indel rate");
  IndelHistory h;
  int n = n0;
  double t = 0.0;
  for (;;) {
    const double eta = total_indel_rate(end, n, params);
    const double dt = rexp(rng, eta);
    if (t + dt >= edge_length) break;
    t += dt;
    IndelEvent ev = sample_process_event(n, end, params, rng);
    ev.time = t;
    h.events.push_back(ev);
    if (is_killing(ev.kind))
      return {h, eval_kill_density(h, n0, edge_length, end, params)};
    n += is_insertion(ev.kind) ? ev.length : -ev.length;
  }
  // no natural kill: append one at a uniform residual time
  const double kappa = kill_append_rate(end, n, params);
  IndelEvent ev;
  ev.time = runif(rng, t, edge_length);
  double u = runif(rng) * kappa;
  const double ins_end = (end.total() - 2) * params.lambda;
  const double del_end = end.total() * params.mu;
  const double del_before = long_deletion_rate(params);
  if (u < ins_end) {
    ev.kind = EventKind::insertion_end;
    ev.position = sample_end_insertion_position(end, n, rng);
    ev.length = sample_geometric(rng, params.r_geom);
  } else if (u < ins_end + del_end) {
    ev.kind = EventKind::deletion_in_end;
    ev.position = sample_end_deletion_position(end, n, rng);
    ev.length = sample_geometric(rng, params.r_geom);
  } else if (u < ins_end + del_end + del_before) {
    ev.kind = EventKind::deletion_from_before;
    const int i = sample_geometric(rng, params.r_geom);
    ev.position = -i;
    ev.length = i + sample_geometric(rng, params.r_geom);
  } else {
    ev.kind = EventKind::deletion_into_right_end;
    ev.position = runif_int(rng, end.r_left, end.r_left + n - 1);
    const int bound = max_nonkill_deletion(end, n, ev.position);
    ev.length = bound + sample_geometric(rng, params.r_geom);
  }
  h.events.push_back(ev);
  return {h, eval_kill_density(h, n0, edge_length, end, params)};
}

double eval_kill_density(const IndelHistory& h, int n0, double edge_length,
                         const EndRegions& end, const IndelParams& params) {
  SUBID_REQUIRE(h.has_kill(), "kill density evaluated on a non-killing history");
  const std::vector<int> lengths = replay_history(h, n0, end, edge_length);
  const std::size_t k = h.events.size();

  // natural route: every event from the full-rate process, stop at the kill
  double natural = 0.0;
  double t_prev = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    natural -= total_indel_rate(end, lengths[i], params) * (h.events[i].time - t_prev);
    natural += process_event_logfactor(h.events[i], params);
    t_prev = h.events[i].time;
  }

  // appended route: natural non-kill prefix, event-free remainder, uniform
  // kill time and rate-proportional kill category
  double forced = 0.0;
  t_prev = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    forced -= total_indel_rate(end, lengths[i], params) * (h.events[i].time - t_prev);
    forced += process_event_logfactor(h.events[i], params);
    t_prev = h.events[i].time;
  }
  const int n_last = lengths[k - 1];
  forced -= total_indel_rate(end, n_last, params) * (edge_length - t_prev);
  forced -= std::log(edge_length - t_prev);
  const IndelEvent& last = h.events[k - 1];
  forced += process_event_logfactor(last, params);
  forced -= std::log(kill_append_rate(end, n_last, params));
  if (last.kind == EventKind::deletion_into_right_end) {
    const int bound = max_nonkill_deletion(end, n_last, last.position);
    forced -= bound * std::log1p(-params.r_geom);  // length conditioned to exceed bound
  }
  return log_sum_exp(natural, forced);
}

HistoryProposal repropose_edge_history(const IndelHistory& old, int n0, int n_child,
                                       double edge_length, const EndRegions& end,
                                       const IndelParams& params, Rng& rng) {
  if (old.has_kill()) return propose_kill_history(n0, edge_length, end, params, rng);
  return propose_nokill_history(n0, n_child, edge_length, end, params, rng);
}

double eval_edge_history_density(const IndelHistory& h, int n0, double edge_length,
                                 const EndRegions& end, const IndelParams& params) {
  if (h.has_kill()) return eval_kill_density(h, n0, edge_length, end, params);
  return eval_nokill_density(h, n0, edge_length, end, params);
}

int sample_length_walk(int current, int lo, double step_r, Rng& rng) {
  SUBID_REQUIRE(current >= lo, "walk must start inside its support");
  const double q = 1.0 - step_r;
  const int down_span = current - lo;
  const double z_down = (1.0 - std::pow(q, down_span + 1)) / step_r;  // d = 0..span
  const double z_up = q / step_r;                                     // d >= 1
  double u = runif(rng) * (z_down + z_up);
  if (u < z_down) {
    // smallest d with (1 - q^{d+1})/step_r >= u
    const double x = 1.0 - u * step_r;
    int d = x <= 0.0 ? down_span
                     : static_cast<int>(std::ceil(std::log(x) / std::log(q))) - 1;
    return current - std::clamp(d, 0, down_span);
  }
  u -= z_down;
  const double x = q - u * step_r;
  int d = x <= 0.0 ? 1 : static_cast<int>(std::ceil(std::log(x) / std::log(q))) - 1;
  return current + std::max(1, d);
}

double length_walk_logpmf(int proposed, int current, int lo, double step_r) {
  if (proposed < lo || current < lo) return kNegInf;
  const double q = 1.0 - step_r;
  const int down_span = current - lo;
  const double z = (1.0 - std::pow(q, down_span + 1)) / step_r + q / step_r;
  return std::abs(proposed - current) * std::log(q) - std::log(z);
}

}  // namespace subid
