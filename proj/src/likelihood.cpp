#include "subid/likelihood.hpp"

#include <cmath>

namespace subid {

void AugmentedLocus::refresh(const PhyloTree& tree) {
  SUBID_REQUIRE(end.valid(), "invalid end regions");
  SUBID_REQUIRE(n_ancestor >= 1, "ancestor length must be >= 1");
  SUBID_REQUIRE(ancestor_edge_length > 0.0, "attached edge length must be positive");
  SUBID_REQUIRE(static_cast<int>(histories.size()) == tree.n_nodes(),
                "need one history slot per node");
  SUBID_REQUIRE(static_cast<int>(node_mz.size()) == tree.n_nodes(),
                "need one (M,Z) per node");
  node_n.assign(tree.n_nodes(), 0);
  dead.assign(tree.n_nodes(), false);

  const std::vector<int> lengths =
      replay_history(ancestor_history, n_ancestor, end, ancestor_edge_length);
  const bool root_dead = ancestor_history.has_kill();
  dead[tree.root] = root_dead;
  node_n[tree.root] = root_dead ? 0 : lengths.back();

  for (int v : tree.preorder()) {
    if (v == tree.root) continue;
    const int p = tree.nodes[v].parent;
    if (dead[p]) {
      SUBID_REQUIRE(histories[v].empty(), "edges below a kill must have empty histories");
      dead[v] = true;
      continue;
    }
    const std::vector<int> seq =
        replay_history(histories[v], node_n[p], end, tree.edge_length[v]);
    if (histories[v].has_kill()) {
      dead[v] = true;
    } else {
      node_n[v] = seq.back();
    }
  }
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (dead[v]) {
      SUBID_REQUIRE(node_mz[v] == NodeMZ{0, 0}, "dead nodes must carry canonical (0,0)");
    } else {
      SUBID_REQUIRE(node_mz[v].m >= 0 && node_mz[v].m <= end.total(),
                    "mismatch count out of range");
      SUBID_REQUIRE(node_mz[v].z == 0 || node_mz[v].z == 1, "cutter flag must be 0/1");
    }
  }
}

bool AugmentedLocus::leaf_visible(int leaf, int n_min, int n_max) const {
  if (dead[leaf]) return false;
  return node_mz[leaf] == NodeMZ{0, 0} && node_n[leaf] >= n_min && node_n[leaf] <= n_max;
}

double history_loglik(const IndelHistory& h, int n0, const EndRegions& end,
                      double edge_length, const IndelParams& params) {
  SUBID_REQUIRE(edge_length > 0.0, "edge length must be positive");
  const std::vector<int> lengths = replay_history(h, n0, end, edge_length);
  const double log_g_base = std::log1p(-params.r_geom);
  double ll = 0.0;
  double t_prev = 0.0;
  for (std::size_t i = 0; i < h.events.size(); ++i) {
    const IndelEvent& ev = h.events[i];
    ll -= total_indel_rate(end, lengths[i], params) * (ev.time - t_prev);
    t_prev = ev.time;
    ll += is_insertion(ev.kind) ? std::log(params.lambda) : std::log(params.mu);
    ll += std::log(params.r_geom) + (ev.length - 1) * log_g_base;
  }
  if (!h.has_kill())
    ll -= total_indel_rate(end, lengths.back(), params) * (edge_length - t_prev);
  return ll;
}

double edge_loglik(const IndelHistory& h, NodeMZ mz_parent, NodeMZ mz_child,
                   double edge_length, const EndRegions& end, int n_parent,
                   const IndelParams& params, MismatchCache* cache) {
  double ll = history_loglik(h, n_parent, end, edge_length, params);
  if (h.has_kill()) return ll;  // child state unconstrained below a kill
  const int r = end.total();
  const double pm = cache != nullptr
                        ? cache->get(r, edge_length)(mz_parent.m, mz_child.m)
                        : mismatch_entry(r, edge_length, mz_parent.m, mz_child.m);
  ll += std::log(pm);
  ll += std::log(
      cutter_entry_given_history(h, edge_length, n_parent, end, mz_parent.z, mz_child.z));
  return ll;
}

double locus_loglik(const AugmentedLocus& locus, const PhyloTree& tree,
                    const IndelParams& params, MismatchCache* cache) {
  AugmentedLocus checked = locus;
  checked.refresh(tree);
  double ll = edge_loglik(checked.ancestor_history, NodeMZ{0, 0},
                          checked.node_mz[tree.root], checked.ancestor_edge_length,
                          checked.end, checked.n_ancestor, params, cache);
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root) continue;
    const int p = tree.nodes[v].parent;
    if (checked.dead[p]) continue;  // likelihood 1 below a kill
    ll += edge_loglik(checked.histories[v], checked.node_mz[p], checked.node_mz[v],
                      tree.edge_length[v], checked.end, checked.node_n[p], params, cache);
  }
  return ll;
}

double tree_loglik(const std::vector<AugmentedLocus>& loci, const PhyloTree& tree,
                   const IndelParams& params, MismatchCache* cache) {
  double ll = 0.0;
  for (const AugmentedLocus& locus : loci) ll += locus_loglik(locus, tree, params, cache);
  return ll;
}

LocusAssignment assignment_from_loci(const std::vector<AugmentedLocus>& loci,
                                     const PhyloTree& tree, int n_min, int n_max) {
  LocusAssignment y;
  y.taxon_names = tree.taxon_names;
  for (const AugmentedLocus& locus : loci) {
    LocusAssignment::Locus out;
    out.plate = locus.plate;
    for (int i = 0; i < tree.n_taxa(); ++i) {
      if (locus.dead[i])
        out.entries.push_back({-1, 0});
      else
        out.entries.push_back(
            {locus.leaf_visible(i, n_min, n_max) ? 1 : 0, locus.node_n[i]});
    }
    y.loci.push_back(std::move(out));
  }
  return y;
}

}  // namespace subid
