#include "subid/chain.hpp"

#include <cmath>
#include <iostream>

namespace subid {

int Chain::band_of(int plate, int marker_length) const {
  return x->find_band(plate, marker_length);
}

double Chain::k_logpmf(int k, int plate) const {
  if (priors.loci_model == LociModel::general) {
    const int k_max = std::max(priors.k_max, 10 * plate_band_count[plate]);
    if (k < 1 || k > k_max) return kNegInf;
    return -std::log(static_cast<double>(k_max));
  }
  const double mean = plate_band_count[plate] > 0
                          ? static_cast<double>(plate_band_count[plate])
                          : priors.k_mean;
  return negbinom_logpmf(k, mean, priors.k_variance);
}

VisiblePattern Chain::visible_pattern(int locus) const {
  VisiblePattern p;
  p.n.assign(tree.n_taxa(), -1);
  const AugmentedLocus& lc = loci[locus];
  for (int i = 0; i < tree.n_taxa(); ++i)
    if (lc.leaf_visible(i, priors.n_min, priors.n_max)) {
      p.n[i] = lc.node_n[i];
      ++p.count;
    }
  return p;
}

EdgeTerms Chain::compute_edge_terms(const AugmentedLocus& lc, int node) {
  if (settings.prior_only) return {};
  const int parent = tree.nodes[node].parent;
  if (lc.dead[parent]) return {};  // edges below a kill contribute 1
  EdgeTerms t;
  t.hist = history_loglik(lc.histories[node], lc.node_n[parent], lc.end,
                          tree.edge_length[node], params);
  if (!lc.histories[node].has_kill()) {
    const double pm = mcache.get(lc.end.total(), tree.edge_length[node])(
        lc.node_mz[parent].m, lc.node_mz[node].m);
    t.mz = std::log(pm) +
           std::log(cutter_entry_given_history(lc.histories[node], tree.edge_length[node],
                                               lc.node_n[parent], lc.end,
                                               lc.node_mz[parent].z, lc.node_mz[node].z));
  }
  return t;
}

EdgeTerms Chain::compute_attached_terms(const AugmentedLocus& lc) {
  if (settings.prior_only) return {};
  EdgeTerms t;
  t.hist = history_loglik(lc.ancestor_history, lc.n_ancestor, lc.end,
                          lc.ancestor_edge_length, params);
  if (!lc.ancestor_history.has_kill()) {
    const double pm =
        mcache.get(lc.end.total(), lc.ancestor_edge_length)(0, lc.node_mz[tree.root].m);
    t.mz = std::log(pm) + std::log(cutter_entry_given_history(
                              lc.ancestor_history, lc.ancestor_edge_length, lc.n_ancestor,
                              lc.end, 0, lc.node_mz[tree.root].z));
  }
  return t;
}

double Chain::compute_locus_prior(const AugmentedLocus& lc) const {
  double lp = end_region_logprior(lc.end) + ancestor_length_logpmf(lc.n_ancestor, priors) +
              attached_edge_logprior(lc.ancestor_edge_length, priors);
  if (priors.loci_model == LociModel::restricted && !settings.prior_only) {
    bool any_visible = false;
    for (int i = 0; i < tree.n_taxa(); ++i)
      any_visible = any_visible || lc.leaf_visible(i, priors.n_min, priors.n_max);
    if (!any_visible) return kNegInf;  // restricted loci must produce a marker
  }
  return lp;
}

double Chain::recompute_locus(int locus) {
  loci[locus].refresh(tree);
  auto& terms = edge_terms[locus];
  terms.assign(tree.n_nodes(), {});
  terms[tree.root] = compute_attached_terms(loci[locus]);
  double total = terms[tree.root].total();
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root) continue;
    terms[v] = compute_edge_terms(loci[locus], v);
    total += terms[v].total();
  }
  locus_ll[locus] = total;
  locus_prior[locus] = compute_locus_prior(loci[locus]);
  return total;
}

void Chain::commit_locus(int locus, AugmentedLocus&& cand, const std::vector<int>& touched,
                         const std::vector<EdgeTerms>& terms) {
  SUBID_CHECK(touched.size() == terms.size(), "touched/terms size mismatch");
  loci[locus] = std::move(cand);
  double delta = 0.0;
  for (std::size_t i = 0; i < touched.size(); ++i) {
    delta += terms[i].total() - edge_terms[locus][touched[i]].total();
    edge_terms[locus][touched[i]] = terms[i];
  }
  locus_ll[locus] += delta;
  ll += delta;
  const double new_prior = compute_locus_prior(loci[locus]);
  prior += new_prior - locus_prior[locus];
  locus_prior[locus] = new_prior;
}

void Chain::recompute_all() {
  const int k = static_cast<int>(loci.size());
  edge_terms.assign(k, {});
  locus_ll.assign(k, 0.0);
  locus_prior.assign(k, 0.0);

  plate_band_count.assign(std::max(x->n_plates(), 1), 0);
  for (const auto& b : x->bands) ++plate_band_count[b.plate];
  plate_ones.assign(plate_band_count.size(), {});
  for (int j = 0; j < x->n_bands(); ++j)
    for (int i = 0; i < x->n_taxa(); ++i)
      if (x->presence[i][j]) plate_ones[x->bands[j].plate].push_back({i, j});

  plate_loci_count.assign(plate_band_count.size(), 0);
  for (const auto& lc : loci) {
    SUBID_REQUIRE(lc.plate >= 0 && lc.plate < n_plates(), "locus plate out of range");
    ++plate_loci_count[lc.plate];
  }

  ll = 0.0;
  for (int i = 0; i < k; ++i) ll += recompute_locus(i);

  cover.assign(x->n_taxa(), std::vector<int>(x->n_bands(), 0));
  for (int i = 0; i < k; ++i) {
    const VisiblePattern p = visible_pattern(i);
    for (int taxon = 0; taxon < tree.n_taxa(); ++taxon) {
      if (p.n[taxon] < 0) continue;
      const int band = band_of(loci[i].plate, p.n[taxon] + kMarkerLengthOffset);
      if (!settings.prior_only)
        SUBID_CHECK(band >= 0 && x->presence[taxon][band] == 1,
                    "visible marker not present in the data");
      if (band >= 0) ++cover[taxon][band];
    }
  }
  if (!settings.prior_only) {
    for (int j = 0; j < x->n_bands(); ++j)
      for (int i = 0; i < x->n_taxa(); ++i)
        if (x->presence[i][j]) SUBID_CHECK(cover[i][j] >= 1, "uncovered data marker");
  }

  prior = tree_logprior(tree, priors) + rate_logprior(params, priors);
  for (int p = 0; p < n_plates(); ++p) prior += k_logpmf(plate_loci_count[p], p);
  for (int i = 0; i < k; ++i) prior += locus_prior[i];
}

void Chain::verify_caches(double tol) {
  const double old_ll = ll;
  const double old_prior = prior;
  Chain copy = *this;
  copy.recompute_all();
  if (std::abs(copy.ll - old_ll) > tol || std::abs(copy.prior - old_prior) > tol) {
    std::cerr << "cache drift: ll " << old_ll << " vs " << copy.ll << ", prior "
              << old_prior << " vs " << copy.prior << "\n";
    throw std::logic_error("chain cache does not match recompute");
  }
}

bool Chain::state_consistent() const {
  if (settings.prior_only) return true;
  const LocusAssignment y = assignment_from_loci(loci, tree, priors.n_min, priors.n_max);
  MarkerMatrix derived = derive_observed(y);
  // bands must coincide with the data's bands when restricted to 1 patterns
  for (auto& b : derived.bands) b = b;  // keep structure
  return derived == *x;
}

bool mh_accept(double log_lik_ratio, double log_prior_ratio,
               double log_q_reverse_minus_forward, double heat, Rng& rng) {
  if (std::isnan(log_lik_ratio) || std::isnan(log_prior_ratio) ||
      std::isnan(log_q_reverse_minus_forward)) {
    std::cerr << "mh_accept: rejecting NaN proposal ratio\n";
    return false;
  }
  const double log_alpha = heat * (log_lik_ratio + log_prior_ratio) +
                           log_q_reverse_minus_forward;
  if (log_alpha == kNegInf) return false;
  if (log_alpha >= 0.0) return true;
  return std::log(runif(rng)) < log_alpha;
}

void MoveStats::add(const MoveStats& o) {
  auto acc = [](Row& a, const Row& b) {
    a.proposed += b.proposed;
    a.accepted += b.accepted;
  };
  acc(rates, o.rates);
  acc(edge_len, o.edge_len);
  acc(attached_len, o.attached_len);
  acc(root_slide, o.root_slide);
  acc(nni, o.nni);
  acc(history, o.history);
  acc(node_n, o.node_n);
  acc(ancestor_n, o.ancestor_n);
  acc(end_regions, o.end_regions);
  acc(mz_gibbs, o.mz_gibbs);
  acc(kill_toggle, o.kill_toggle);
  acc(split, o.split);
  acc(merge, o.merge);
  acc(birth, o.birth);
  acc(death, o.death);
}

}  // namespace subid
