#pragma once

#include <optional>
#include <vector>

#include "subid/kernels.hpp"
#include "subid/marker_data.hpp"
#include "subid/model.hpp"
#include "subid/tree.hpp"

namespace subid {

struct NodeMZ {
  int m = 0;
  int z = 0;
  bool operator==(const NodeMZ&) const = default;
};

// Fully augmented per-locus state: end regions, intermediate length at the
// ancestor node, the attached-edge history, one history per tree edge and
// (M, Z) at every tree node.  Node A is pinned at (0, 0).  Derived fields
// (per-node N, dead flags) are filled by refresh().
//
// Dead-subtree convention: a kill on an edge marks every node below it dead;
// histories of edges whose parent is dead are canonically empty and such
// edges contribute likelihood 1.
struct AugmentedLocus {
  int plate = 0;
  EndRegions end;
  int n_ancestor = 1;
  double ancestor_edge_length = 0.0;
  IndelHistory ancestor_history;         // edge from node A down to the root
  std::vector<IndelHistory> histories;   // [node] history of the edge above node
  std::vector<NodeMZ> node_mz;           // [node]; canonical (0,0) when dead

  // derived by refresh()
  std::vector<int> node_n;               // [node]; 0 when dead
  std::vector<bool> dead;                // [node]

  void refresh(const PhyloTree& tree);   // recompute + validate; throws on bad state
  bool leaf_visible(int leaf, int n_min, int n_max) const;
};

// Likelihood of an indel history along one edge: exponential waiting terms at
// the current total rate plus one (lambda or mu) g(l) factor per event; the
// final waiting term is dropped when the history kills.
double history_loglik(const IndelHistory& h, int n0, const EndRegions& end,
                      double edge_length, const IndelParams& params);

// Full per-edge term: history likelihood times the mismatch and the
// history-conditioned cutter transition entries; the substitution factors and
// the child state are dropped for killing histories.
double edge_loglik(const IndelHistory& h, NodeMZ mz_parent, NodeMZ mz_child,
                   double edge_length, const EndRegions& end, int n_parent,
                   const IndelParams& params, MismatchCache* cache = nullptr);

// Sum of edge terms over the attached edge and all tree edges.
double locus_loglik(const AugmentedLocus& locus, const PhyloTree& tree,
                    const IndelParams& params, MismatchCache* cache = nullptr);

double tree_loglik(const std::vector<AugmentedLocus>& loci, const PhyloTree& tree,
                   const IndelParams& params, MismatchCache* cache = nullptr);

// AFLP values implied by augmented states: -1 below kills, 1 for leaves with
// zero mismatches, no cutters and N inside the visibility window, else 0.
LocusAssignment assignment_from_loci(const std::vector<AugmentedLocus>& loci,
                                     const PhyloTree& tree, int n_min, int n_max);

}  // namespace subid
