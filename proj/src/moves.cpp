#include <algorithm>
#include <cmath>

#include "subid/chain.hpp"

namespace subid {

namespace {

// ---------------------------------------------------------------------------
// shared helpers

struct MzWeights {
  std::vector<double> w;  // row-major (m, z) over (R+1) x 2
  int r = 0;
  double total = 0.0;

  double& at(int m, int z) { return w[m * 2 + z]; }
  double at(int m, int z) const { return w[m * 2 + z]; }
};

MzWeights mz_weights_from_parent(Chain& c, const EndRegions& end, const IndelHistory& h,
                                 double edge_length, int n_parent, NodeMZ parent) {
  MzWeights out;
  out.r = end.total();
  out.w.assign((out.r + 1) * 2, 0.0);
  const MismatchMatrix& pm = c.mcache.get(out.r, edge_length);
  const double z0 = cutter_entry_given_history(h, edge_length, n_parent, end, parent.z, 0);
  for (int m = 0; m <= out.r; ++m) {
    const double base = pm(parent.m, m);
    out.at(m, 0) = base * z0;
    out.at(m, 1) = base * (1.0 - z0);
    out.total += base;
  }
  return out;
}

NodeMZ sample_mz(const MzWeights& w, double total, Rng& rng) {
  double u = runif(rng) * total;
  for (int m = 0; m <= w.r; ++m)
    for (int z = 0; z < 2; ++z) {
      u -= w.at(m, z);
      if (u <= 0.0) return {m, z};
    }
  return {w.r, 1};
}

bool in_window(const PriorConfig& priors, int n) {
  return n >= priors.n_min && n <= priors.n_max;
}

std::vector<int> subtree_preorder(const PhyloTree& tree, int top) {
  std::vector<int> out;
  std::vector<int> stack{top};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    out.push_back(v);
    if (!tree.is_leaf(v)) {
      stack.push_back(tree.nodes[v].right);
      stack.push_back(tree.nodes[v].left);
    }
  }
  return out;
}

double safe_eval_nokill(const IndelHistory& h, int n0, double edge_length,
                        const EndRegions& end, const IndelParams& params) {
  if (h.has_kill()) return kNegInf;
  try {
    return eval_nokill_density(h, n0, edge_length, end, params);
  } catch (const std::invalid_argument&) {
    return kNegInf;
  }
}

double safe_eval_edge(const IndelHistory& h, int n0, double edge_length,
                      const EndRegions& end, const IndelParams& params) {
  try {
    return eval_edge_history_density(h, n0, edge_length, end, params);
  } catch (const std::invalid_argument&) {
    return kNegInf;
  }
}

// Candidate-locus edit: finalize computes terms over the touched slots.
struct LocusEdit {
  AugmentedLocus cand;
  std::vector<int> touched;
  std::vector<EdgeTerms> terms;
  double dlik = 0.0;
  double dprior = 0.0;

  bool finalize(Chain& c, int k) {
    try {
      cand.refresh(c.tree);
    } catch (const std::invalid_argument&) {
      return false;
    }
    terms.clear();
    for (int slot : touched) {
      const EdgeTerms t = slot == c.tree.root ? c.compute_attached_terms(cand)
                                              : c.compute_edge_terms(cand, slot);
      terms.push_back(t);
      dlik += t.total() - c.edge_terms[k][slot].total();
    }
    dprior = c.compute_locus_prior(cand) - c.locus_prior[k];
    return true;
  }
};

// Visibility change of one leaf against the data and coverage.
struct LeafFlip {
  int remove_band = -1;
  int add_band = -1;
  bool valid = true;
};

LeafFlip check_leaf_flip(const Chain& c, int locus, int leaf, bool was_visible, int n_old,
                         bool now_visible, int n_new) {
  LeafFlip flip;
  if (c.settings.prior_only) return flip;
  const int plate = c.loci[locus].plate;
  if (was_visible == now_visible && (!was_visible || n_old == n_new)) return flip;
  if (was_visible) {
    const int band = c.band_of(plate, n_old + kMarkerLengthOffset);
    SUBID_CHECK(band >= 0, "visible leaf with off-band length");
    flip.remove_band = band;
  }
  if (now_visible) {
    const int band = c.band_of(plate, n_new + kMarkerLengthOffset);
    if (band < 0 || c.x->presence[leaf][band] != 1) {
      flip.valid = false;  // would show a marker the data lacks
      return flip;
    }
    flip.add_band = band;
  }
  if (flip.remove_band >= 0 && flip.remove_band != flip.add_band &&
      c.cover[leaf][flip.remove_band] < 2)
    flip.valid = false;  // sole producer of an observed marker
  return flip;
}

void apply_leaf_flip(Chain& c, int leaf, const LeafFlip& flip) {
  if (flip.remove_band == flip.add_band) return;
  if (flip.remove_band >= 0) --c.cover[leaf][flip.remove_band];
  if (flip.add_band >= 0) ++c.cover[leaf][flip.add_band];
}

// ---------------------------------------------------------------------------
// rate, length and topology moves

bool move_rate_component(Chain& c, Rng& rng, int which) {
  double log_hastings = 0.0;
  IndelParams prop = c.params;
  if (which == 0) {
    const double eps = runif(rng, -c.settings.rate_step, c.settings.rate_step);
    prop.mu = c.params.mu * std::exp(eps);
    log_hastings = std::log(prop.mu / c.params.mu);
  } else {
    double* field = which == 1 ? &prop.beta : &prop.r_geom;
    const double cur = *field;
    const double eps = runif(rng, -c.settings.logit_step, c.settings.logit_step);
    const double next = 1.0 / (1.0 + std::exp(-(std::log(cur / (1.0 - cur)) + eps)));
    if (!(next > 0.0) || !(next < 1.0)) return false;
    *field = next;
    log_hastings = std::log(next * (1.0 - next)) - std::log(cur * (1.0 - cur));
  }
  prop.lambda = prop.mu * prop.beta;

  const double dprior = rate_logprior(prop, c.priors) - rate_logprior(c.params, c.priors);
  // rates touch only the indel-history parts of the edge terms
  double dlik = 0.0;
  std::vector<std::vector<double>> new_hist(c.loci.size());
  if (!c.settings.prior_only) {
    for (std::size_t k = 0; k < c.loci.size(); ++k) {
      const AugmentedLocus& lc = c.loci[k];
      new_hist[k].assign(c.tree.n_nodes(), 0.0);
      new_hist[k][c.tree.root] = history_loglik(lc.ancestor_history, lc.n_ancestor,
                                                lc.end, lc.ancestor_edge_length, prop);
      dlik += new_hist[k][c.tree.root] - c.edge_terms[k][c.tree.root].hist;
      for (int v = 0; v < c.tree.n_nodes(); ++v) {
        if (v == c.tree.root || lc.dead[c.tree.nodes[v].parent]) continue;
        new_hist[k][v] = history_loglik(lc.histories[v], lc.node_n[c.tree.nodes[v].parent],
                                        lc.end, c.tree.edge_length[v], prop);
        dlik += new_hist[k][v] - c.edge_terms[k][v].hist;
      }
    }
  }
  if (!mh_accept(dlik, dprior, log_hastings, c.heat, rng)) return false;
  c.params = prop;
  if (!c.settings.prior_only) {
    for (std::size_t k = 0; k < c.loci.size(); ++k) {
      const AugmentedLocus& lc = c.loci[k];
      double locus_delta = 0.0;
      for (int v = 0; v < c.tree.n_nodes(); ++v) {
        if (v != c.tree.root && lc.dead[c.tree.nodes[v].parent]) continue;
        locus_delta += new_hist[k][v] - c.edge_terms[k][v].hist;
        c.edge_terms[k][v].hist = new_hist[k][v];
      }
      c.locus_ll[k] += locus_delta;
    }
  }
  c.ll += dlik;
  c.prior += dprior;
  return true;
}

// Multiplier on one edge length; event times on the edge scale with it.
bool move_edge_length(Chain& c, Rng& rng, int v) {
  const double t_old = c.tree.edge_length[v];
  const double eps = runif(rng, -c.settings.edge_step, c.settings.edge_step);
  const double t_new = t_old * std::exp(eps);
  const double scale = t_new / t_old;
  const int parent = c.tree.nodes[v].parent;

  long n_events = 0;
  std::vector<IndelHistory> scaled(c.loci.size());
  std::vector<EdgeTerms> new_terms(c.loci.size());
  double dlik = 0.0;
  c.tree.edge_length[v] = t_new;
  for (std::size_t k = 0; k < c.loci.size(); ++k) {
    AugmentedLocus& lc = c.loci[k];
    if (lc.dead[parent]) continue;
    scaled[k] = lc.histories[v];
    for (auto& ev : scaled[k].events) ev.time *= scale;
    n_events += static_cast<long>(scaled[k].events.size());
    std::swap(lc.histories[v], scaled[k]);
    new_terms[k] = c.compute_edge_terms(lc, v);
    std::swap(lc.histories[v], scaled[k]);
    dlik += new_terms[k].total() - c.edge_terms[k][v].total();
  }
  c.tree.edge_length[v] = t_old;

  const double dprior =
      exp_logpdf(t_new, c.priors.gamma) - exp_logpdf(t_old, c.priors.gamma);
  if (!mh_accept(dlik, dprior, (n_events + 1) * std::log(scale), c.heat, rng))
    return false;
  c.tree.edge_length[v] = t_new;
  for (std::size_t k = 0; k < c.loci.size(); ++k) {
    if (c.loci[k].dead[parent]) continue;
    c.loci[k].histories[v] = std::move(scaled[k]);
    c.locus_ll[k] += new_terms[k].total() - c.edge_terms[k][v].total();
    c.edge_terms[k][v] = new_terms[k];
  }
  c.ll += dlik;
  c.prior += dprior;
  return true;
}

bool move_attached_length(Chain& c, Rng& rng, int k) {
  const AugmentedLocus& lc = c.loci[k];
  const double t_old = lc.ancestor_edge_length;
  const double eps = runif(rng, -c.settings.edge_step, c.settings.edge_step);
  const double t_new = t_old * std::exp(eps);
  const double scale = t_new / t_old;

  LocusEdit edit;
  edit.cand = lc;
  edit.cand.ancestor_edge_length = t_new;
  for (auto& ev : edit.cand.ancestor_history.events) ev.time *= scale;
  edit.touched = {c.tree.root};
  if (!edit.finalize(c, k)) return false;
  const long n_events = static_cast<long>(lc.ancestor_history.events.size());
  if (!mh_accept(edit.dlik, edit.dprior, (n_events + 1) * std::log(scale), c.heat, rng))
    return false;
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  return true;
}

// Uniform root reposition along the path joining its two children, with
// fresh histories on both child edges (kill status preserved).
bool move_root_slide(Chain& c, Rng& rng) {
  const int root = c.tree.root;
  const int left = c.tree.nodes[root].left;
  const int right = c.tree.nodes[root].right;
  const double total = c.tree.edge_length[left] + c.tree.edge_length[right];
  const double t_left = runif(rng, 0.0, total);
  const double t_right = total - t_left;
  if (!(t_left > 0.0) || !(t_right > 0.0)) return false;

  double dlik = 0.0;
  double log_q = 0.0;
  std::vector<LocusEdit> edits(c.loci.size());
  const double old_left = c.tree.edge_length[left];
  const double old_right = c.tree.edge_length[right];
  c.tree.edge_length[left] = t_left;
  c.tree.edge_length[right] = t_right;
  bool ok = true;
  for (std::size_t k = 0; k < c.loci.size() && ok; ++k) {
    LocusEdit& edit = edits[k];
    edit.cand = c.loci[k];
    edit.touched = {left, right};
    if (!edit.cand.dead[root]) {
      for (int kid : {left, right}) {
        const double t_new = c.tree.edge_length[kid];
        const double t_kid_old = kid == left ? old_left : old_right;
        IndelHistory& slot = edit.cand.histories[kid];
        const int n_child = slot.has_kill() ? 0 : edit.cand.node_n[kid];
        try {
          HistoryProposal hp = repropose_edge_history(
              slot, edit.cand.node_n[root], n_child, t_new, edit.cand.end, c.params, rng);
          log_q -= hp.log_density;
          log_q += safe_eval_edge(slot, edit.cand.node_n[root], t_kid_old, edit.cand.end,
                                  c.params);
          slot = std::move(hp.history);
        } catch (const std::invalid_argument&) {
          ok = false;
          break;
        }
      }
    }
    if (ok) ok = edit.finalize(c, static_cast<int>(k));
    dlik += edit.dlik;
  }
  // edge-length prior is a function of the preserved sum, so its delta is zero
  if (!ok || !mh_accept(dlik, 0.0, log_q, c.heat, rng)) {
    c.tree.edge_length[left] = old_left;
    c.tree.edge_length[right] = old_right;
    return false;
  }
  for (std::size_t k = 0; k < c.loci.size(); ++k)
    c.commit_locus(static_cast<int>(k), std::move(edits[k].cand), edits[k].touched,
                   edits[k].terms);
  return true;
}

// Rooted nearest-neighbor interchange around the edge above internal node v.
// The swapped subtrees keep their edge lengths and their histories' kill
// status; histories on the two moved edges are re-proposed.
bool move_nni(Chain& c, Rng& rng, int v) {
  const int u = c.tree.nodes[v].parent;
  const int s = c.tree.sibling(v);
  const int x =
      runif(rng) < 0.5 ? c.tree.nodes[v].left : c.tree.nodes[v].right;
  for (const AugmentedLocus& lc : c.loci)
    if (lc.dead[v]) return false;  // keep dead-subtree bookkeeping intact

  // structural swap
  auto set_child = [&](int node, int from, int to) {
    if (c.tree.nodes[node].left == from)
      c.tree.nodes[node].left = to;
    else
      c.tree.nodes[node].right = to;
  };
  auto do_swap = [&] {
    set_child(u, s, x);
    set_child(v, x, s);
    c.tree.nodes[s].parent = v;
    c.tree.nodes[x].parent = u;
  };
  do_swap();

  double dlik = 0.0;
  double log_q = 0.0;
  std::vector<LocusEdit> edits(c.loci.size());
  bool ok = true;
  for (std::size_t k = 0; k < c.loci.size() && ok; ++k) {
    LocusEdit& edit = edits[k];
    edit.cand = c.loci[k];
    edit.touched = {s, x};
    const int n_u = edit.cand.node_n[u];
    const int n_v = edit.cand.node_n[v];
    struct Job {
      int edge;
      int n_parent_new;
      int n_parent_old;
    };
    for (const Job& job : {Job{s, n_v, n_u}, Job{x, n_u, n_v}}) {
      IndelHistory& slot = edit.cand.histories[job.edge];
      const int n_child = slot.has_kill() ? 0 : edit.cand.node_n[job.edge];
      try {
        HistoryProposal hp =
            repropose_edge_history(slot, job.n_parent_new, n_child,
                                   c.tree.edge_length[job.edge], edit.cand.end,
                                   c.params, rng);
        log_q -= hp.log_density;
        log_q += safe_eval_edge(slot, job.n_parent_old, c.tree.edge_length[job.edge],
                                edit.cand.end, c.params);
        slot = std::move(hp.history);
      } catch (const std::invalid_argument&) {
        ok = false;
        break;
      }
    }
    if (ok) ok = edit.finalize(c, static_cast<int>(k));
    dlik += edit.dlik;
  }
  if (!ok || !mh_accept(dlik, 0.0, log_q, c.heat, rng)) {
    // undo swap
    set_child(u, x, s);
    set_child(v, s, x);
    c.tree.nodes[s].parent = u;
    c.tree.nodes[x].parent = v;
    return false;
  }
  for (std::size_t k = 0; k < c.loci.size(); ++k)
    c.commit_locus(static_cast<int>(k), std::move(edits[k].cand), edits[k].touched,
                   edits[k].terms);
  return true;
}

// ---------------------------------------------------------------------------
// per-locus structural moves

bool move_history(Chain& c, Rng& rng, int k, int v) {
  const AugmentedLocus& lc = c.loci[k];
  const bool attached = v == c.tree.root;
  if (!attached && lc.dead[c.tree.nodes[v].parent]) return false;
  const int n_parent = attached ? lc.n_ancestor : lc.node_n[c.tree.nodes[v].parent];
  const double t = attached ? lc.ancestor_edge_length : c.tree.edge_length[v];
  const IndelHistory& old = attached ? lc.ancestor_history : lc.histories[v];
  const int n_child = old.has_kill() ? 0 : lc.node_n[v];

  LocusEdit edit;
  edit.cand = lc;
  edit.touched = {v};
  double log_q = 0.0;
  try {
    HistoryProposal hp =
        repropose_edge_history(old, n_parent, n_child, t, lc.end, c.params, rng);
    log_q = safe_eval_edge(old, n_parent, t, lc.end, c.params) - hp.log_density;
    (attached ? edit.cand.ancestor_history : edit.cand.histories[v]) =
        std::move(hp.history);
  } catch (const std::invalid_argument&) {
    return false;
  }
  if (!edit.finalize(c, k)) return false;
  if (!mh_accept(edit.dlik, edit.dprior, log_q, c.heat, rng)) return false;
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  return true;
}

// Random-walk update of the intermediate length at one node (or at the
// ancestor node), with the incident edge histories re-proposed.
bool move_node_n(Chain& c, Rng& rng, int k, int v, bool ancestor) {
  const AugmentedLocus& lc = c.loci[k];
  if (!ancestor && lc.dead[v]) return false;
  const int n_old = ancestor ? lc.n_ancestor : lc.node_n[v];
  const int n_new = sample_length_walk(n_old, 1, c.settings.n_walk_r, rng);
  if (n_new == n_old) return false;
  double log_q = length_walk_logpmf(n_old, n_new, 1, c.settings.n_walk_r) -
                 length_walk_logpmf(n_new, n_old, 1, c.settings.n_walk_r);

  LocusEdit edit;
  edit.cand = lc;
  LeafFlip flip;

  if (ancestor) {
    edit.cand.n_ancestor = n_new;
    edit.touched = {c.tree.root};
    IndelHistory& slot = edit.cand.ancestor_history;
    const int n_child = slot.has_kill() ? 0 : lc.node_n[c.tree.root];
    try {
      HistoryProposal hp = repropose_edge_history(slot, n_new, n_child,
                                                  lc.ancestor_edge_length, lc.end,
                                                  c.params, rng);
      log_q += safe_eval_edge(slot, n_old, lc.ancestor_edge_length, lc.end, c.params);
      log_q -= hp.log_density;
      slot = std::move(hp.history);
    } catch (const std::invalid_argument&) {
      return false;
    }
  } else {
    if (c.tree.is_leaf(v)) {
      const bool was_visible = lc.leaf_visible(v, c.priors.n_min, c.priors.n_max);
      const bool now_visible = lc.node_mz[v] == NodeMZ{0, 0} && in_window(c.priors, n_new);
      flip = check_leaf_flip(c, k, v, was_visible, n_old, now_visible, n_new);
      if (!flip.valid) return false;
    }
    edit.touched = {v};
    if (!c.tree.is_leaf(v)) {
      edit.touched.push_back(c.tree.nodes[v].left);
      edit.touched.push_back(c.tree.nodes[v].right);
    }
    for (int e : edit.touched) {
      const bool upper = e == v;
      const bool attached_edge = upper && v == c.tree.root;
      IndelHistory& slot =
          attached_edge ? edit.cand.ancestor_history : edit.cand.histories[e];
      const int n_parent =
          upper ? (attached_edge ? lc.n_ancestor : lc.node_n[c.tree.nodes[v].parent])
                : n_new;
      const int n_child = slot.has_kill() ? 0 : (upper ? n_new : lc.node_n[e]);
      const double t = attached_edge ? lc.ancestor_edge_length : c.tree.edge_length[e];
      const int n_parent_old = upper ? n_parent : n_old;
      try {
        HistoryProposal hp =
            repropose_edge_history(slot, n_parent, n_child, t, lc.end, c.params, rng);
        log_q += safe_eval_edge(slot, n_parent_old, t, lc.end, c.params);
        log_q -= hp.log_density;
        slot = std::move(hp.history);
      } catch (const std::invalid_argument&) {
        return false;
      }
    }
    if (v == c.tree.root) {
      // the slot above the root is the attached edge in the touched list
      std::replace(edit.touched.begin(), edit.touched.end(), v, c.tree.root);
    }
  }
  if (!edit.finalize(c, k)) return false;
  if (!mh_accept(edit.dlik, edit.dprior, log_q, c.heat, rng)) return false;
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  if (!ancestor && c.tree.is_leaf(v)) apply_leaf_flip(c, v, flip);
  return true;
}

// Switch (R_L, R_R) among its three admissible values; stored intermediate
// positions shift with R_L, end-region event positions are unaffected labels.
bool move_end_regions(Chain& c, Rng& rng, int k) {
  const AugmentedLocus& lc = c.loci[k];
  static const EndRegions kChoices[3] = {{7, 9}, {9, 7}, {9, 9}};
  std::vector<EndRegions> alts;
  for (const auto& e : kChoices)
    if (e.r_left != lc.end.r_left || e.r_right != lc.end.r_right) alts.push_back(e);
  const EndRegions next = alts[runif_int(rng, 0, 1)];

  if (next.total() < lc.end.total())
    for (int v = 0; v < c.tree.n_nodes(); ++v)
      if (!lc.dead[v] && lc.node_mz[v].m > next.total()) return false;

  const int shift = next.r_left - lc.end.r_left;
  LocusEdit edit;
  edit.cand = lc;
  edit.cand.end = next;
  auto shift_positions = [&](IndelHistory& h) {
    for (auto& ev : h.events)
      if (ev.kind == EventKind::insertion || ev.kind == EventKind::deletion ||
          ev.kind == EventKind::deletion_into_right_end)
        ev.position += shift;
  };
  shift_positions(edit.cand.ancestor_history);
  for (auto& h : edit.cand.histories) shift_positions(h);
  for (int v = 0; v < c.tree.n_nodes(); ++v) edit.touched.push_back(v);
  if (!edit.finalize(c, k)) return false;
  if (!mh_accept(edit.dlik, edit.dprior, 0.0, c.heat, rng)) return false;
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  return true;
}

// Gibbs update of one node's (M, Z) from its full conditional; leaves carry
// the data-consistency restriction.
bool move_mz_gibbs(Chain& c, Rng& rng, int k, int v) {
  if (c.settings.prior_only) return false;
  const AugmentedLocus& lc = c.loci[k];
  if (lc.dead[v]) return false;

  const bool attached = v == c.tree.root;
  const IndelHistory& upper = attached ? lc.ancestor_history : lc.histories[v];
  const double t_upper = attached ? lc.ancestor_edge_length : c.tree.edge_length[v];
  const int n_upper = attached ? lc.n_ancestor : lc.node_n[c.tree.nodes[v].parent];
  const NodeMZ parent_mz =
      attached ? NodeMZ{0, 0} : lc.node_mz[c.tree.nodes[v].parent];

  MzWeights w = mz_weights_from_parent(c, lc.end, upper, t_upper, n_upper, parent_mz);
  // children terms
  std::vector<int> live_kids;
  if (!c.tree.is_leaf(v))
    for (int kid : {c.tree.nodes[v].left, c.tree.nodes[v].right})
      if (!lc.histories[kid].has_kill()) live_kids.push_back(kid);
  for (int kid : live_kids) {
    const MismatchMatrix& pm = c.mcache.get(lc.end.total(), c.tree.edge_length[kid]);
    for (int m = 0; m <= w.r; ++m) {
      const double pmm = pm(m, lc.node_mz[kid].m);
      for (int z = 0; z < 2; ++z) {
        const double pz =
            cutter_entry_given_history(lc.histories[kid], c.tree.edge_length[kid],
                                       lc.node_n[v], lc.end, z, lc.node_mz[kid].z);
        w.at(m, z) *= pmm * pz;
      }
    }
  }
  const bool is_leaf = c.tree.is_leaf(v);
  const bool was_visible = is_leaf && lc.leaf_visible(v, c.priors.n_min, c.priors.n_max);
  if (is_leaf) {
    const bool window = in_window(c.priors, lc.node_n[v]);
    bool sole_visible = false;
    if (c.priors.loci_model == LociModel::restricted && !c.settings.prior_only &&
        was_visible) {
      sole_visible = true;
      for (int i = 0; i < c.tree.n_taxa() && sole_visible; ++i)
        if (i != v && lc.leaf_visible(i, c.priors.n_min, c.priors.n_max))
          sole_visible = false;
    }
    for (int m = 0; m <= w.r; ++m)
      for (int z = 0; z < 2; ++z) {
        const bool vis = m == 0 && z == 0 && window;
        if (vis == was_visible) continue;
        if (!vis && sole_visible) {  // restricted loci must keep a marker
          w.at(m, z) = 0.0;
          continue;
        }
        if (!check_leaf_flip(c, k, v, was_visible, lc.node_n[v], vis, lc.node_n[v]).valid)
          w.at(m, z) = 0.0;
      }
  }
  double total = 0.0;
  for (double x : w.w) total += x;
  if (!(total > 0.0)) return false;
  const NodeMZ next = sample_mz(w, total, rng);
  if (next == lc.node_mz[v]) return true;  // Gibbs step, nothing to change

  LocusEdit edit;
  edit.cand = lc;
  edit.cand.node_mz[v] = next;
  edit.touched = {v};
  for (int kid : live_kids) edit.touched.push_back(kid);
  if (!edit.finalize(c, k)) return false;
  const bool now_visible =
      is_leaf && edit.cand.leaf_visible(v, c.priors.n_min, c.priors.n_max);
  LeafFlip flip;
  if (is_leaf && was_visible != now_visible)
    flip = check_leaf_flip(c, k, v, was_visible, lc.node_n[v], now_visible, lc.node_n[v]);
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  if (is_leaf) apply_leaf_flip(c, v, flip);
  return true;
}

// ---------------------------------------------------------------------------
// kill toggle with subtree revival

// Density pieces of the revival recipe applied to an existing alive subtree
// (used as the reverse density when introducing a kill).  The recipe: child
// length from a walk centered at the parent length, a no-kill history per
// edge, node states sampled forward from the kernels with leaves restricted
// to invisible states.
double eval_revival(Chain& c, const AugmentedLocus& lc, int top_edge, int n_parent,
                    double t_edge) {
  double q = 0.0;
  const IndelHistory& h_top = lc.histories[top_edge];
  if (h_top.has_kill()) return kNegInf;
  const int n_c = lc.node_n[top_edge];
  q += length_walk_logpmf(n_c, n_parent, 1, c.settings.n_walk_r);
  q += safe_eval_nokill(h_top, n_parent, t_edge, lc.end, c.params);
  for (int w : subtree_preorder(c.tree, top_edge)) {
    if (w != top_edge) {
      const int pw = c.tree.nodes[w].parent;
      if (lc.histories[w].has_kill()) return kNegInf;
      q += length_walk_logpmf(lc.node_n[w], lc.node_n[pw], 1, c.settings.n_walk_r);
      q += safe_eval_nokill(lc.histories[w], lc.node_n[pw], c.tree.edge_length[w],
                            lc.end, c.params);
    }
    // node state density
    const int pw = c.tree.nodes[w].parent;
    const NodeMZ parent_mz = w == top_edge && pw >= 0 ? lc.node_mz[pw] : lc.node_mz[pw];
    MzWeights weights = mz_weights_from_parent(
        c, lc.end, lc.histories[w], c.tree.edge_length[w],
        w == top_edge ? n_parent : lc.node_n[pw], parent_mz);
    double total = weights.total;
    if (c.tree.is_leaf(w) && in_window(c.priors, lc.node_n[w])) {
      total -= weights.at(0, 0);
      weights.at(0, 0) = 0.0;
      if (lc.node_mz[w] == NodeMZ{0, 0}) return kNegInf;  // visible leaf unreachable
    }
    const double p = weights.at(lc.node_mz[w].m, lc.node_mz[w].z) / total;
    if (!(p > 0.0)) return kNegInf;
    q += std::log(p);
  }
  return q;
}

// Samples the revival recipe into `cand`, returning the forward density.
double propose_revival(Chain& c, AugmentedLocus& cand, int top_edge, int n_parent,
                       double t_edge, Rng& rng) {
  double q = 0.0;
  const int n_c = sample_length_walk(n_parent, 1, c.settings.n_walk_r, rng);
  q += length_walk_logpmf(n_c, n_parent, 1, c.settings.n_walk_r);
  HistoryProposal hp =
      propose_nokill_history(n_parent, n_c, t_edge, cand.end, c.params, rng);
  cand.histories[top_edge] = std::move(hp.history);
  q += hp.log_density;
  std::vector<int> node_n(c.tree.n_nodes(), 0);
  node_n[top_edge] = n_c;
  for (int w : subtree_preorder(c.tree, top_edge)) {
    if (w == top_edge) continue;
    const int pw = c.tree.nodes[w].parent;
    const int n_w = sample_length_walk(node_n[pw], 1, c.settings.n_walk_r, rng);
    node_n[w] = n_w;
    q += length_walk_logpmf(n_w, node_n[pw], 1, c.settings.n_walk_r);
    hp = propose_nokill_history(node_n[pw], n_w, c.tree.edge_length[w], cand.end,
                                c.params, rng);
    cand.histories[w] = std::move(hp.history);
    q += hp.log_density;
  }
  for (int w : subtree_preorder(c.tree, top_edge)) {
    const int pw = c.tree.nodes[w].parent;
    const NodeMZ parent_mz = cand.node_mz[pw];
    MzWeights weights = mz_weights_from_parent(
        c, cand.end, cand.histories[w], c.tree.edge_length[w],
        w == top_edge ? n_parent : node_n[pw], parent_mz);
    double total = weights.total;
    if (c.tree.is_leaf(w) && in_window(c.priors, node_n[w])) {
      total -= weights.at(0, 0);  // revived leaves stay invisible
      weights.at(0, 0) = 0.0;
    }
    if (!(total > 0.0)) return kNegInf;
    const NodeMZ mz = sample_mz(weights, total, rng);
    cand.node_mz[w] = mz;
    q += std::log(weights.at(mz.m, mz.z) / total);
  }
  return q;
}

bool move_kill_toggle(Chain& c, Rng& rng, int k) {
  const AugmentedLocus& lc = c.loci[k];
  // pick a tree edge (slot = child node, excluding the root slot which is the
  // attached edge; attached-edge kills are toggled via history moves)
  std::vector<int> candidates;
  for (int v = 0; v < c.tree.n_nodes(); ++v) {
    if (v == c.tree.root) continue;
    if (!lc.dead[c.tree.nodes[v].parent]) candidates.push_back(v);
  }
  if (candidates.empty()) return false;
  const int v = candidates[runif_int(rng, 0, static_cast<int>(candidates.size()) - 1)];
  const int parent = c.tree.nodes[v].parent;
  const int n_parent = lc.node_n[parent];
  const double t_edge = c.tree.edge_length[v];

  LocusEdit edit;
  edit.cand = lc;
  edit.touched = subtree_preorder(c.tree, v);
  double log_q = 0.0;

  if (!lc.histories[v].has_kill()) {
    // introduce a kill: wipe the subtree; reject when the reverse revival
    // could not recreate it (deeper kills or visible leaves)
    for (int w : edit.touched) {
      if (w != v && lc.histories[w].has_kill()) return false;
      if (c.tree.is_leaf(w) && lc.leaf_visible(w, c.priors.n_min, c.priors.n_max))
        return false;
    }
    log_q += eval_revival(c, lc, v, n_parent, t_edge);  // reverse density
    HistoryProposal hp;
    try {
      hp = propose_kill_history(n_parent, t_edge, lc.end, c.params, rng);
    } catch (const std::invalid_argument&) {
      return false;
    }
    log_q -= hp.log_density;
    edit.cand.histories[v] = std::move(hp.history);
    for (int w : edit.touched) {
      if (w != v) edit.cand.histories[w] = IndelHistory{};
      edit.cand.node_mz[w] = NodeMZ{0, 0};
    }
  } else {
    // revive the subtree
    log_q += safe_eval_kill(lc.histories[v], n_parent, t_edge, lc.end, c.params);
    const double q_fwd = propose_revival(c, edit.cand, v, n_parent, t_edge, rng);
    if (q_fwd == kNegInf) return false;
    log_q -= q_fwd;
  }
  if (!edit.finalize(c, k)) return false;
  if (!mh_accept(edit.dlik, edit.dprior, log_q, c.heat, rng)) return false;
  c.commit_locus(k, std::move(edit.cand), edit.touched, edit.terms);
  return true;
}

// ---------------------------------------------------------------------------
// trans-dimensional moves on the locus set

// A locus is splittable when kill-free with >= 2 visible entries; two loci
// merge when kill-free, same plate, visible in disjoint taxon sets.
bool locus_kill_free(const Chain& c, const AugmentedLocus& lc) {
  if (lc.ancestor_history.has_kill()) return false;
  for (int v = 0; v < c.tree.n_nodes(); ++v)
    if (v != c.tree.root && lc.histories[v].has_kill()) return false;
  return true;
}

std::vector<int> splittable_loci(Chain& c, int plate) {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(c.loci.size()); ++k) {
    if (c.loci[k].plate != plate) continue;
    if (!locus_kill_free(c, c.loci[k])) continue;
    if (c.visible_pattern(k).count >= 2) out.push_back(k);
  }
  return out;
}

std::vector<std::pair<int, int>> mergeable_pairs(Chain& c, int plate) {
  std::vector<std::pair<int, int>> out;
  std::vector<int> eligible;
  for (int k = 0; k < static_cast<int>(c.loci.size()); ++k) {
    if (c.loci[k].plate != plate) continue;
    if (!locus_kill_free(c, c.loci[k])) continue;
    if (c.visible_pattern(k).count >= 1) eligible.push_back(k);
  }
  for (std::size_t a = 0; a < eligible.size(); ++a)
    for (std::size_t b = a + 1; b < eligible.size(); ++b) {
      const VisiblePattern pa = c.visible_pattern(eligible[a]);
      const VisiblePattern pb = c.visible_pattern(eligible[b]);
      bool disjoint = true;
      for (int i = 0; i < c.tree.n_taxa() && disjoint; ++i)
        if (pa.n[i] >= 0 && pb.n[i] >= 0) disjoint = false;
      if (disjoint) out.push_back({eligible[a], eligible[b]});
    }
  return out;
}

// Death candidates must be re-creatable by a birth: kill-free, with either no
// visible entries (general model) or one visible entry that another locus
// also covers.
std::vector<int> death_candidates(Chain& c, int plate) {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(c.loci.size()); ++k) {
    if (c.loci[k].plate != plate) continue;
    if (!locus_kill_free(c, c.loci[k])) continue;
    const VisiblePattern p = c.visible_pattern(k);
    if (p.count == 0) {
      if (c.priors.loci_model == LociModel::general || c.settings.prior_only)
        out.push_back(k);
      continue;
    }
    if (p.count != 1) continue;
    for (int i = 0; i < c.tree.n_taxa(); ++i) {
      if (p.n[i] < 0) continue;
      const int band = c.band_of(c.loci[k].plate, p.n[i] + kMarkerLengthOffset);
      if (band < 0) break;  // off-band visible (prior_only states)
      if (c.settings.prior_only || c.cover[i][band] >= 2) out.push_back(k);
      break;
    }
  }
  return out;
}

void add_locus_bookkeeping(Chain& c, int k) {
  ++c.plate_loci_count[c.loci[k].plate];
  const VisiblePattern p = c.visible_pattern(k);
  for (int i = 0; i < c.tree.n_taxa(); ++i) {
    if (p.n[i] < 0) continue;
    const int band = c.band_of(c.loci[k].plate, p.n[i] + kMarkerLengthOffset);
    if (band >= 0) ++c.cover[i][band];
  }
}

void remove_locus_bookkeeping(Chain& c, int k) {
  --c.plate_loci_count[c.loci[k].plate];
  const VisiblePattern p = c.visible_pattern(k);
  for (int i = 0; i < c.tree.n_taxa(); ++i) {
    if (p.n[i] < 0) continue;
    const int band = c.band_of(c.loci[k].plate, p.n[i] + kMarkerLengthOffset);
    if (band >= 0) --c.cover[i][band];
  }
}

// Appends a locus (with full caches and the loci-count prior term); returns
// its index.
int push_locus(Chain& c, AugmentedLocus&& lc) {
  c.loci.push_back(std::move(lc));
  const int k = static_cast<int>(c.loci.size()) - 1;
  const int plate = c.loci[k].plate;
  c.edge_terms.emplace_back();
  c.locus_ll.push_back(0.0);
  c.locus_prior.push_back(0.0);
  const double lll = c.recompute_locus(k);
  c.ll += lll;
  c.prior += c.k_logpmf(c.plate_loci_count[plate] + 1, plate) -
             c.k_logpmf(c.plate_loci_count[plate], plate);
  c.prior += c.locus_prior[k];
  add_locus_bookkeeping(c, k);
  return k;
}

void erase_locus(Chain& c, int k) {
  const int plate = c.loci[k].plate;
  c.prior += c.k_logpmf(c.plate_loci_count[plate] - 1, plate) -
             c.k_logpmf(c.plate_loci_count[plate], plate);
  remove_locus_bookkeeping(c, k);
  c.ll -= c.locus_ll[k];
  c.prior -= c.locus_prior[k];
  c.loci.erase(c.loci.begin() + k);
  c.edge_terms.erase(c.edge_terms.begin() + k);
  c.locus_ll.erase(c.locus_ll.begin() + k);
  c.locus_prior.erase(c.locus_prior.begin() + k);
}

double k_pmf_delta(const Chain& c, int plate, int dk) {
  return c.k_logpmf(c.plate_loci_count[plate] + dk, plate) -
         c.k_logpmf(c.plate_loci_count[plate], plate);
}

// Uniform choice of a bipartition of the visible entries into two nonempty
// parts: the part containing the first visible taxon is encoded by the bits
// of an integer in [0, 2^(m-1) - 2].
std::pair<VisiblePattern, VisiblePattern> split_pattern(const VisiblePattern& p,
                                                        std::uint64_t code, int n_taxa) {
  VisiblePattern a, b;
  a.n.assign(n_taxa, -1);
  b.n.assign(n_taxa, -1);
  bool first = true;
  int bit = 0;
  for (int i = 0; i < n_taxa; ++i) {
    if (p.n[i] < 0) continue;
    bool in_a;
    if (first) {
      in_a = true;
      first = false;
    } else {
      in_a = ((code >> bit) & 1) == 0;
      ++bit;
    }
    if (in_a) {
      a.n[i] = p.n[i];
      ++a.count;
    } else {
      b.n[i] = p.n[i];
      ++b.count;
    }
  }
  return {a, b};
}

double log_num_partitions(int m) {
  return std::log(std::pow(2.0, m - 1) - 1.0);
}

bool move_split(Chain& c, Rng& rng, int plate) {
  const std::vector<int> splittable = splittable_loci(c, plate);
  if (splittable.empty()) return false;
  const int k = splittable[runif_int(rng, 0, static_cast<int>(splittable.size()) - 1)];
  const VisiblePattern p = c.visible_pattern(k);
  const std::uint64_t n_codes = (std::uint64_t{1} << (p.count - 1)) - 1;
  const std::uint64_t code =
      std::uniform_int_distribution<std::uint64_t>(0, n_codes - 1)(rng);
  auto [pa, pb] = split_pattern(p, code, c.tree.n_taxa());

  const LocusProposal qa = propose_locus_targeted(c, plate, pa, rng);
  const LocusProposal qb = propose_locus_targeted(c, plate, pb, rng);
  const double q_merged = eval_locus_targeted(c, c.loci[k]);

  const double dprior_k = k_pmf_delta(c, plate, +1);
  const double prior_a = c.compute_locus_prior(qa.locus);
  const double prior_b = c.compute_locus_prior(qb.locus);
  double ll_a = 0.0, ll_b = 0.0;
  {
    AugmentedLocus tmp_a = qa.locus;
    AugmentedLocus tmp_b = qb.locus;
    ll_a = c.settings.prior_only ? 0.0 : locus_loglik(tmp_a, c.tree, c.params, &c.mcache);
    ll_b = c.settings.prior_only ? 0.0 : locus_loglik(tmp_b, c.tree, c.params, &c.mcache);
  }
  const double dlik = ll_a + ll_b - c.locus_ll[k];
  const double dprior = dprior_k + prior_a + prior_b - c.locus_prior[k];

  // reverse: a merge that picks the (a, b) pair and re-proposes the merged locus
  // counts on the post-move state
  const long pairs_after = [&] {
    // current pairs minus those involving k, plus pairs formed by a and b
    auto pairs = mergeable_pairs(c, plate);
    long count = 0;
    std::vector<int> eligible;
    for (const auto& pr : pairs)
      if (pr.first != k && pr.second != k) ++count;
    // a-b pair itself
    ++count;
    // pairs of a or b with existing loci
    for (int other = 0; other < static_cast<int>(c.loci.size()); ++other) {
      if (other == k || c.loci[other].plate != plate) continue;
      if (!locus_kill_free(c, c.loci[other])) continue;
      const VisiblePattern po = c.visible_pattern(other);
      if (po.count < 1) continue;
      for (const VisiblePattern* part : {&pa, &pb}) {
        bool disjoint = true;
        for (int i = 0; i < c.tree.n_taxa() && disjoint; ++i)
          if (po.n[i] >= 0 && part->n[i] >= 0) disjoint = false;
        if (disjoint) ++count;
      }
    }
    return count;
  }();

  const double log_q_fwd = -std::log(static_cast<double>(splittable.size())) -
                           log_num_partitions(p.count) + qa.log_density + qb.log_density;
  const double log_q_rev = -std::log(static_cast<double>(pairs_after)) + q_merged;
  if (!mh_accept(dlik, dprior, log_q_rev - log_q_fwd, c.heat, rng)) return false;

  erase_locus(c, k);
  push_locus(c, AugmentedLocus(qa.locus));
  push_locus(c, AugmentedLocus(qb.locus));
  return true;
}

bool move_merge(Chain& c, Rng& rng, int plate) {
  const auto pairs = mergeable_pairs(c, plate);
  if (pairs.empty()) return false;
  const auto [ka, kb] = pairs[runif_int(rng, 0, static_cast<int>(pairs.size()) - 1)];
  const VisiblePattern pa = c.visible_pattern(ka);
  const VisiblePattern pb = c.visible_pattern(kb);
  VisiblePattern merged;
  merged.n.assign(c.tree.n_taxa(), -1);
  for (int i = 0; i < c.tree.n_taxa(); ++i) {
    merged.n[i] = pa.n[i] >= 0 ? pa.n[i] : pb.n[i];
    if (merged.n[i] >= 0) ++merged.count;
  }

  const LocusProposal qm = propose_locus_targeted(c, plate, merged, rng);
  const double q_a = eval_locus_targeted(c, c.loci[ka]);
  const double q_b = eval_locus_targeted(c, c.loci[kb]);

  const double prior_m = c.compute_locus_prior(qm.locus);
  AugmentedLocus tmp = qm.locus;
  const double ll_m =
      c.settings.prior_only ? 0.0 : locus_loglik(tmp, c.tree, c.params, &c.mcache);
  const double dlik = ll_m - c.locus_ll[ka] - c.locus_ll[kb];
  const double dprior =
      k_pmf_delta(c, plate, -1) + prior_m - c.locus_prior[ka] - c.locus_prior[kb];

  // reverse: a split that picks the merged locus and this exact bipartition
  const long splittable_after = [&] {
    long count = 1;  // the merged locus itself
    for (int other = 0; other < static_cast<int>(c.loci.size()); ++other) {
      if (other == ka || other == kb || c.loci[other].plate != plate) continue;
      if (!locus_kill_free(c, c.loci[other])) continue;
      if (c.visible_pattern(other).count >= 2) ++count;
    }
    return count;
  }();
  const double log_q_fwd = -std::log(static_cast<double>(pairs.size())) + qm.log_density;
  const double log_q_rev = -std::log(static_cast<double>(splittable_after)) -
                           log_num_partitions(merged.count) + q_a + q_b;
  if (!mh_accept(dlik, dprior, log_q_rev - log_q_fwd, c.heat, rng)) return false;

  erase_locus(c, std::max(ka, kb));
  erase_locus(c, std::min(ka, kb));
  push_locus(c, AugmentedLocus(qm.locus));
  return true;
}

bool move_birth(Chain& c, Rng& rng, int plate) {
  const bool general =
      c.priors.loci_model == LociModel::general || c.settings.prior_only;
  double log_pattern_choice = 0.0;
  VisiblePattern pattern;
  pattern.n.assign(c.tree.n_taxa(), -1);
  if (general && runif(rng) < 0.5) {
    log_pattern_choice += std::log(0.5);
  } else {
    if (general) log_pattern_choice += std::log(0.5);
    const auto& ones = c.plate_ones[plate];
    if (ones.empty()) return false;
    const auto [taxon, band] = ones[runif_int(rng, 0, static_cast<int>(ones.size()) - 1)];
    pattern.n[taxon] = c.x->bands[band].marker_length - kMarkerLengthOffset;
    pattern.count = 1;
    log_pattern_choice -= std::log(static_cast<double>(ones.size()));
  }

  const LocusProposal q = propose_locus_targeted(c, plate, pattern, rng);
  const double prior_new = c.compute_locus_prior(q.locus);
  AugmentedLocus tmp = q.locus;
  const double ll_new =
      c.settings.prior_only ? 0.0 : locus_loglik(tmp, c.tree, c.params, &c.mcache);
  const double dprior = k_pmf_delta(c, plate, +1) + prior_new;

  // the reverse death-candidate count is taken on the post-birth state (the
  // new coverage can make other loci deletable)
  const int k = push_locus(c, AugmentedLocus(q.locus));
  const long deaths_after = static_cast<long>(death_candidates(c, plate).size());
  const double log_q_fwd = log_pattern_choice + q.log_density;
  const double log_q_rev = -std::log(static_cast<double>(deaths_after));
  if (!mh_accept(ll_new, dprior, log_q_rev - log_q_fwd, c.heat, rng)) {
    erase_locus(c, k);
    return false;
  }
  return true;
}

bool move_death(Chain& c, Rng& rng, int plate) {
  const auto candidates = death_candidates(c, plate);
  if (candidates.empty()) return false;
  const int k = candidates[runif_int(rng, 0, static_cast<int>(candidates.size()) - 1)];
  const bool general =
      c.priors.loci_model == LociModel::general || c.settings.prior_only;
  const VisiblePattern p = c.visible_pattern(k);

  double log_pattern_choice = 0.0;
  if (p.count == 0) {
    if (!general) return false;
    log_pattern_choice += std::log(0.5);
  } else {
    if (general) log_pattern_choice += std::log(0.5);
    log_pattern_choice -= std::log(static_cast<double>(c.plate_ones[plate].size()));
  }
  const double q_locus = eval_locus_targeted(c, c.loci[k]);
  const double dprior = k_pmf_delta(c, plate, -1) - c.locus_prior[k];
  const double dlik = -c.locus_ll[k];
  const double log_q_fwd = -std::log(static_cast<double>(candidates.size()));
  const double log_q_rev = log_pattern_choice + q_locus;
  if (!mh_accept(dlik, dprior, log_q_rev - log_q_fwd, c.heat, rng)) return false;
  erase_locus(c, k);
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// the deterministic scan

void sweep(Chain& c, Rng& rng, MoveStats* stats) {
  MoveStats local;
  auto tally = [](MoveStats::Row& row, bool accepted) {
    ++row.proposed;
    if (accepted) ++row.accepted;
  };

  for (int v : c.tree.internal_nodes_except_root())
    tally(local.nni, move_nni(c, rng, v));
  tally(local.root_slide, move_root_slide(c, rng));
  for (int v = 0; v < c.tree.n_nodes(); ++v) {
    if (v == c.tree.root) continue;
    tally(local.edge_len, move_edge_length(c, rng, v));
  }

  for (int k = 0; k < static_cast<int>(c.loci.size()); ++k) {
    tally(local.attached_len, move_attached_length(c, rng, k));
    tally(local.ancestor_n, move_node_n(c, rng, k, -1, true));
    tally(local.end_regions, move_end_regions(c, rng, k));
    tally(local.kill_toggle, move_kill_toggle(c, rng, k));
    tally(local.history, move_history(c, rng, k, c.tree.root));  // attached edge
    for (int v = 0; v < c.tree.n_nodes(); ++v) {
      if (v == c.tree.root) continue;
      tally(local.history, move_history(c, rng, k, v));
    }
    for (int v = 0; v < c.tree.n_nodes(); ++v) {
      if (c.loci[k].dead[v]) continue;
      tally(local.node_n, move_node_n(c, rng, k, v, false));
    }
    if (!c.settings.prior_only)
      for (int v = 0; v < c.tree.n_nodes(); ++v)
        tally(local.mz_gibbs, move_mz_gibbs(c, rng, k, v));
  }

  for (int plate = 0; plate < c.n_plates(); ++plate) {
    if (runif(rng) < 0.5)
      tally(local.split, move_split(c, rng, plate));
    else
      tally(local.merge, move_merge(c, rng, plate));
    if (runif(rng) < 0.5)
      tally(local.birth, move_birth(c, rng, plate));
    else
      tally(local.death, move_death(c, rng, plate));
  }

  for (int which : {0, 1, 2}) tally(local.rates, move_rate_component(c, rng, which));

  if (stats != nullptr) stats->add(local);
}

// ---------------------------------------------------------------------------
// targeted locus proposal and initial state


namespace {

struct SubtreeTargets {
  std::vector<int> lo, hi;  // per node; -1 when no visible target below
};

SubtreeTargets subtree_targets(const PhyloTree& tree, const VisiblePattern& pattern) {
  SubtreeTargets t;
  t.lo.assign(tree.n_nodes(), -1);
  t.hi.assign(tree.n_nodes(), -1);
  const std::vector<int> order = tree.preorder();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int v = *it;
    if (tree.is_leaf(v)) {
      if (pattern.n[v] >= 0) t.lo[v] = t.hi[v] = pattern.n[v];
      continue;
    }
    for (int kid : {tree.nodes[v].left, tree.nodes[v].right}) {
      if (t.lo[kid] < 0) continue;
      t.lo[v] = t.lo[v] < 0 ? t.lo[kid] : std::min(t.lo[v], t.lo[kid]);
      t.hi[v] = t.hi[v] < 0 ? t.hi[kid] : std::max(t.hi[v], t.hi[kid]);
    }
  }
  return t;
}

int walk_center(const SubtreeTargets& targets, int v, int parent_n) {
  if (targets.lo[v] < 0) return parent_n;
  return (targets.lo[v] + targets.hi[v] + 1) / 2;
}

}  // namespace

LocusProposal propose_locus_targeted(Chain& chain, int plate,
                                     const VisiblePattern& pattern, Rng& rng) {
  const PhyloTree& tree = chain.tree;
  const PriorConfig& priors = chain.priors;
  const double walk_r = chain.settings.pattern_walk_r;
  LocusProposal out;
  AugmentedLocus& lc = out.locus;
  double& q = out.log_density;

  lc.plate = plate;
  lc.end = sample_end_regions(rng);
  q += end_region_logprior(lc.end);
  lc.ancestor_edge_length = rexp(rng, 1.0 / priors.nu);
  q += exp_logpdf(lc.ancestor_edge_length, priors.nu);

  const SubtreeTargets targets = subtree_targets(tree, pattern);
  if (targets.lo[tree.root] >= 0) {
    const int center = walk_center(targets, tree.root, 0);
    lc.n_ancestor = sample_length_walk(center, 1, walk_r, rng);
    q += length_walk_logpmf(lc.n_ancestor, center, 1, walk_r);
  } else {
    lc.n_ancestor = sample_ancestor_length(priors, rng);
    q += ancestor_length_logpmf(lc.n_ancestor, priors);
  }

  std::vector<int> node_n(tree.n_nodes(), 0);
  for (int v : tree.preorder()) {
    const int parent_n = v == tree.root ? lc.n_ancestor : node_n[tree.nodes[v].parent];
    if (tree.is_leaf(v) && pattern.n[v] >= 0) {
      node_n[v] = pattern.n[v];  // pinned
      continue;
    }
    const int center = walk_center(targets, v, parent_n);
    node_n[v] = sample_length_walk(center, 1, walk_r, rng);
    q += length_walk_logpmf(node_n[v], center, 1, walk_r);
  }

  lc.histories.assign(tree.n_nodes(), {});
  HistoryProposal hp = propose_nokill_history(lc.n_ancestor, node_n[tree.root],
                                              lc.ancestor_edge_length, lc.end,
                                              chain.params, rng);
  lc.ancestor_history = std::move(hp.history);
  q += hp.log_density;
  for (int v : tree.preorder()) {
    if (v == tree.root) continue;
    hp = propose_nokill_history(node_n[tree.nodes[v].parent], node_n[v],
                                tree.edge_length[v], lc.end, chain.params, rng);
    lc.histories[v] = std::move(hp.history);
    q += hp.log_density;
  }

  lc.node_mz.assign(tree.n_nodes(), NodeMZ{0, 0});
  for (int v : tree.preorder()) {
    if (tree.is_leaf(v) && pattern.n[v] >= 0) continue;  // pinned to (0,0)
    const int parent = tree.nodes[v].parent;
    const NodeMZ parent_mz = v == tree.root ? NodeMZ{0, 0} : lc.node_mz[parent];
    const IndelHistory& h = v == tree.root ? lc.ancestor_history : lc.histories[v];
    const double t = v == tree.root ? lc.ancestor_edge_length : tree.edge_length[v];
    const int n_parent = v == tree.root ? lc.n_ancestor : node_n[parent];
    MzWeights w = mz_weights_from_parent(chain, lc.end, h, t, n_parent, parent_mz);
    double total = w.total;
    if (tree.is_leaf(v) && in_window(priors, node_n[v])) {
      total -= w.at(0, 0);  // leaves outside the pattern stay invisible
      w.at(0, 0) = 0.0;
    }
    const NodeMZ mz = sample_mz(w, total, rng);
    lc.node_mz[v] = mz;
    q += std::log(w.at(mz.m, mz.z) / total);
  }
  lc.refresh(tree);
  return out;
}

double eval_locus_targeted(Chain& chain, const AugmentedLocus& lc) {
  const PhyloTree& tree = chain.tree;
  const PriorConfig& priors = chain.priors;
  const double walk_r = chain.settings.pattern_walk_r;
  if (lc.ancestor_history.has_kill()) return kNegInf;
  for (int v = 0; v < tree.n_nodes(); ++v)
    if (v != tree.root && lc.histories[v].has_kill()) return kNegInf;

  VisiblePattern pattern;
  pattern.n.assign(tree.n_taxa(), -1);
  for (int i = 0; i < tree.n_taxa(); ++i)
    if (lc.leaf_visible(i, priors.n_min, priors.n_max)) {
      pattern.n[i] = lc.node_n[i];
      ++pattern.count;
    }

  double q = end_region_logprior(lc.end);
  q += exp_logpdf(lc.ancestor_edge_length, priors.nu);

  const SubtreeTargets targets = subtree_targets(tree, pattern);
  if (targets.lo[tree.root] >= 0)
    q += length_walk_logpmf(lc.n_ancestor, walk_center(targets, tree.root, 0), 1, walk_r);
  else
    q += ancestor_length_logpmf(lc.n_ancestor, priors);

  for (int v : tree.preorder()) {
    const int parent_n =
        v == tree.root ? lc.n_ancestor : lc.node_n[tree.nodes[v].parent];
    if (tree.is_leaf(v) && pattern.n[v] >= 0) continue;
    q += length_walk_logpmf(lc.node_n[v], walk_center(targets, v, parent_n), 1, walk_r);
  }

  q += safe_eval_nokill(lc.ancestor_history, lc.n_ancestor, lc.ancestor_edge_length,
                        lc.end, chain.params);
  for (int v : tree.preorder()) {
    if (v == tree.root) continue;
    q += safe_eval_nokill(lc.histories[v], lc.node_n[tree.nodes[v].parent],
                          tree.edge_length[v], lc.end, chain.params);
  }
  if (q == kNegInf) return kNegInf;

  for (int v : tree.preorder()) {
    if (tree.is_leaf(v) && pattern.n[v] >= 0) continue;
    const int parent = tree.nodes[v].parent;
    const NodeMZ parent_mz = v == tree.root ? NodeMZ{0, 0} : lc.node_mz[parent];
    const IndelHistory& h = v == tree.root ? lc.ancestor_history : lc.histories[v];
    const double t = v == tree.root ? lc.ancestor_edge_length : tree.edge_length[v];
    const int n_parent = v == tree.root ? lc.n_ancestor : lc.node_n[parent];
    MzWeights w = mz_weights_from_parent(chain, lc.end, h, t, n_parent, parent_mz);
    double total = w.total;
    if (tree.is_leaf(v) && in_window(priors, lc.node_n[v])) {
      total -= w.at(0, 0);
      w.at(0, 0) = 0.0;
    }
    const double p = w.at(lc.node_mz[v].m, lc.node_mz[v].z) / total;
    if (!(p > 0.0)) return kNegInf;
    q += std::log(p);
  }
  return q;
}

Chain make_initial_chain(const MarkerMatrix& x, const PriorConfig& priors,
                         const ChainSettings& settings, Rng& rng) {
  x.validate();
  priors.validate();
  Chain c;
  c.x = &x;
  c.priors = priors;
  c.settings = settings;
  c.tree = random_tree(x.taxon_names, priors.gamma, rng);
  c.params = sample_rate_params(priors, rng);
  for (int j = 0; j < x.n_bands(); ++j) {
    VisiblePattern pattern;
    pattern.n.assign(x.n_taxa(), -1);
    const int n = x.bands[j].marker_length - kMarkerLengthOffset;
    SUBID_REQUIRE(n >= priors.n_min && n <= priors.n_max,
                  "marker length outside the visibility window");
    for (int i = 0; i < x.n_taxa(); ++i)
      if (x.presence[i][j]) {
        pattern.n[i] = n;
        ++pattern.count;
      }
    c.loci.push_back(propose_locus_targeted(c, x.bands[j].plate, pattern, rng).locus);
  }
  c.recompute_all();
  SUBID_CHECK(c.state_consistent(), "initial state inconsistent with the data");
  return c;
}

}  // namespace subid
