#pragma once

#include <string>
#include <vector>

#include "subid/common.hpp"

namespace subid {

// Rooted binary tree over T taxa.  Nodes 0..T-1 are leaves (in taxon order),
// the rest internal; every non-root node stores the length of the edge above
// it.  Per-locus root-to-ancestor edges live with the locus state, not here.
struct PhyloTree {
  struct Node {
    int parent = -1;
    int left = -1;
    int right = -1;
    bool is_leaf() const { return left < 0; }
  };

  std::vector<Node> nodes;
  std::vector<double> edge_length;  // length of the edge above each node; unused at root
  std::vector<std::string> taxon_names;
  int root = -1;

  int n_taxa() const { return static_cast<int>(taxon_names.size()); }
  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_edges() const { return n_nodes() - 1; }

  bool is_leaf(int v) const { return nodes[v].is_leaf(); }
  int sibling(int v) const;
  void validate() const;

  // Nodes in parent-before-child order starting at the root.
  std::vector<int> preorder() const;
  std::vector<int> internal_nodes_except_root() const;
};

// Random topology by sequential uniform joins; edge lengths ~ Exp(1/gamma_mean).
PhyloTree random_tree(const std::vector<std::string>& taxa, double gamma_mean, Rng& rng);

std::string write_newick(const PhyloTree& tree);
PhyloTree parse_newick(const std::string& text);

// Number of rooted binary topologies on t taxa: (2t-3)!!.
double log_num_rooted_topologies(int t);

// Clade of each node as a taxon bitmask (bit i = taxon i), indexed by node.
std::vector<std::uint64_t> node_clades(const PhyloTree& tree);

}  // namespace subid
