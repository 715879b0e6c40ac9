#pragma once

#include <optional>
#include <vector>

#include "subid/likelihood.hpp"
#include "subid/marker_data.hpp"
#include "subid/priors.hpp"
#include "subid/proposals.hpp"
#include "subid/tree.hpp"

namespace subid {

// Tunable proposal step sizes plus scan options.
struct ChainSettings {
  double edge_step = 0.7;        // multiplier half-width for edge lengths
  double rate_step = 0.5;        // log-walk half-width for mu
  double logit_step = 0.7;       // logit-walk half-width for beta and r
  double n_walk_r = 0.35;        // geometric step for node-length walks
  double pattern_walk_r = 0.10;  // geometric spread of targeted-locus lengths
  bool prior_only = false;       // force the whole likelihood (and the data
                                 // consistency indicator) to 1
  long check_interval = 1000;    // sweeps between cache-vs-recompute audits
};

// Cached per-edge likelihood decomposition: the indel-history part and the
// mismatch/cutter part of the per-edge term.
struct EdgeTerms {
  double hist = 0.0;
  double mz = 0.0;
  double total() const { return hist + mz; }
};

// Visible (taxon -> intermediate length) pattern of one locus.
struct VisiblePattern {
  std::vector<int> n;  // per taxon; -1 = not visible
  int count = 0;

  bool empty() const { return count == 0; }
};

// One tempered chain's full augmented state with incremental bookkeeping.
// Invariant outside of move internals: caches match a full recompute and the
// derived marker matrix equals the data (unless prior_only).
struct Chain {
  const MarkerMatrix* x = nullptr;
  PhyloTree tree;
  IndelParams params;
  std::vector<AugmentedLocus> loci;
  PriorConfig priors;
  ChainSettings settings;
  double heat = 1.0;

  // caches
  std::vector<std::vector<EdgeTerms>> edge_terms;  // [locus][node]; root slot = attached edge
  std::vector<double> locus_ll;
  std::vector<double> locus_prior;
  double ll = 0.0;
  double prior = 0.0;
  MismatchCache mcache;

  // data bookkeeping
  std::vector<std::vector<int>> cover;  // [taxon][band] visible producer count
  std::vector<int> plate_band_count;
  std::vector<std::vector<std::pair<int, int>>> plate_ones;  // per plate: (taxon, band)
  std::vector<int> plate_loci_count;

  double log_posterior() const { return ll + prior; }

  int band_of(int plate, int marker_length) const;
  int n_plates() const { return static_cast<int>(plate_band_count.size()); }

  // per-plate loci-count prior (restricted mean = plate band count)
  double k_logpmf(int k, int plate) const;

  VisiblePattern visible_pattern(int locus) const;

  EdgeTerms compute_edge_terms(const AugmentedLocus& lc, int node);  // edge above node
  EdgeTerms compute_attached_terms(const AugmentedLocus& lc);
  double compute_locus_prior(const AugmentedLocus& lc) const;
  double recompute_locus(int locus);                      // refresh + all edge terms
  void recompute_all();                                   // full rebuild; validates
  void verify_caches(double tol);                         // audit; throws on drift

  // Replaces loci[locus] with a refreshed candidate and updates the cached
  // terms restricted to `touched` edge slots (root slot = attached edge).
  void commit_locus(int locus, AugmentedLocus&& cand, const std::vector<int>& touched,
                    const std::vector<EdgeTerms>& terms);

  bool state_consistent() const;  // derived markers equal the data
};

Chain make_initial_chain(const MarkerMatrix& x, const PriorConfig& priors,
                         const ChainSettings& settings, Rng& rng);

// Targeted whole-locus proposal: given a visible pattern, draws end regions,
// an attached edge, per-node lengths (random walks bridged toward the
// pattern's lengths), kill-free histories and node states that realize the
// pattern exactly.  eval returns the density of an existing kill-free locus
// under the same recipe, -inf outside the support.
struct LocusProposal {
  AugmentedLocus locus;
  double log_density = 0.0;
};
LocusProposal propose_locus_targeted(Chain& chain, int plate,
                                     const VisiblePattern& pattern, Rng& rng);
double eval_locus_targeted(Chain& chain, const AugmentedLocus& locus);

// Move acceptance bookkeeping, one row per move family.
struct MoveStats {
  struct Row {
    long proposed = 0;
    long accepted = 0;
    double rate() const { return proposed == 0 ? 0.0 : double(accepted) / proposed; }
  };
  Row rates, edge_len, attached_len, root_slide, nni, history, node_n, ancestor_n,
      end_regions, mz_gibbs, kill_toggle, split, merge, birth, death;

  void add(const MoveStats& o);
};

// Metropolis-Hastings acceptance on log scale: the target ratio is tempered
// by the chain heat, the proposal ratio is not.  Non-finite inputs reject.
bool mh_accept(double log_lik_ratio, double log_prior_ratio,
               double log_q_reverse_minus_forward, double heat, Rng& rng);

// One deterministic scan over every move family.
void sweep(Chain& chain, Rng& rng, MoveStats* stats = nullptr);

}  // namespace subid
