#include "subid/simulate.hpp"

#include <cmath>

#include "subid/kernels.hpp"
#include "subid/proposals.hpp"

namespace subid {

IndelHistory simulate_edge_history(int n0, const EndRegions& end, double edge_length,
                                   const IndelParams& params, Rng& rng) {
  SUBID_REQUIRE(n0 >= 1, "length must be >= 1");
  SUBID_REQUIRE(edge_length >= 0.0, "edge length must be nonnegative");
  IndelHistory h;
  int n = n0;
  double t = 0.0;
  for (;;) {
    const double eta = total_indel_rate(end, n, params);
    const double dt = rexp(rng, eta);
    if (t + dt >= edge_length) return h;
    t += dt;
    IndelEvent ev = sample_process_event(n, end, params, rng);
    ev.time = t;
    h.events.push_back(ev);
    if (is_killing(ev.kind)) return h;
    n += is_insertion(ev.kind) ? ev.length : -ev.length;
  }
}

NodeMZ simulate_edge_mz(NodeMZ parent, const IndelHistory& h, double edge_length,
                        int n_parent, const EndRegions& end, Rng& rng) {
  SUBID_REQUIRE(!h.has_kill(), "child state undefined below a kill");
  const int r = end.total();
  NodeMZ child;
  double u = runif(rng);
  double acc = 0.0;
  child.m = r;
  for (int m = 0; m <= r; ++m) {
    acc += mismatch_entry(r, edge_length, parent.m, m);
    if (u <= acc) {
      child.m = m;
      break;
    }
  }
  const double p0 = cutter_entry_given_history(h, edge_length, n_parent, end, parent.z, 0);
  child.z = runif(rng) <= p0 ? 0 : 1;
  return child;
}

AugmentedLocus simulate_locus(const PhyloTree& tree, const PriorConfig& priors,
                              const IndelParams& params, int plate, Rng& rng) {
  AugmentedLocus locus;
  locus.plate = plate;
  locus.end = sample_end_regions(rng);
  locus.n_ancestor = sample_ancestor_length(priors, rng);
  locus.ancestor_edge_length = rexp(rng, 1.0 / priors.nu);
  locus.histories.assign(tree.n_nodes(), {});
  locus.node_mz.assign(tree.n_nodes(), NodeMZ{0, 0});

  locus.ancestor_history = simulate_edge_history(locus.n_ancestor, locus.end,
                                                 locus.ancestor_edge_length, params, rng);
  std::vector<int> node_n(tree.n_nodes(), 0);
  std::vector<bool> dead(tree.n_nodes(), false);
  if (locus.ancestor_history.has_kill()) {
    dead[tree.root] = true;
  } else {
    node_n[tree.root] =
        replay_history(locus.ancestor_history, locus.n_ancestor, locus.end,
                       locus.ancestor_edge_length)
            .back();
    locus.node_mz[tree.root] =
        simulate_edge_mz(NodeMZ{0, 0}, locus.ancestor_history, locus.ancestor_edge_length,
                         locus.n_ancestor, locus.end, rng);
  }
  for (int v : tree.preorder()) {
    if (v == tree.root) continue;
    const int p = tree.nodes[v].parent;
    if (dead[p]) {
      dead[v] = true;
      continue;
    }
    locus.histories[v] =
        simulate_edge_history(node_n[p], locus.end, tree.edge_length[v], params, rng);
    if (locus.histories[v].has_kill()) {
      dead[v] = true;
      continue;
    }
    node_n[v] = replay_history(locus.histories[v], node_n[p], locus.end,
                               tree.edge_length[v])
                    .back();
    locus.node_mz[v] = simulate_edge_mz(locus.node_mz[p], locus.histories[v],
                                        tree.edge_length[v], node_n[p], locus.end, rng);
  }
  locus.refresh(tree);
  return locus;
}

SimulatedDataset simulate_dataset(const PhyloTree& tree, const PriorConfig& priors,
                                  const IndelParams& params, int n_loci, Rng& rng) {
  SimulatedDataset out;
  for (int k = 0; k < n_loci; ++k)
    out.loci.push_back(simulate_locus(tree, priors, params, 0, rng));
  out.y = assignment_from_loci(out.loci, tree, priors.n_min, priors.n_max);
  out.x = derive_observed(out.y);
  return out;
}

void SeqSimConfig::validate() const {
  double s = 0.0;
  for (double f : base_freq) {
    SUBID_REQUIRE(f > 0.0, "base frequencies must be positive");
    s += f;
  }
  SUBID_REQUIRE(std::abs(s - 1.0) < 1e-9, "base frequencies must sum to 1");
  SUBID_REQUIRE(gamma_shape >= 0.0, "gamma shape must be nonnegative");
  SUBID_REQUIRE(alpha_purine > 0.0 && alpha_pyrimidine > 0.0 && beta_transversion > 0.0,
                "substitution rates must be positive");
}

namespace {

constexpr int kBaseA = 0, kBaseC = 1, kBaseG = 2, kBaseT = 3;

int base_index(char c) {
  switch (c) {
    case 'A': return kBaseA;
    case 'C': return kBaseC;
    case 'G': return kBaseG;
    case 'T': return kBaseT;
  }
  throw std::invalid_argument("non-ACGT base in sequence");
}

constexpr char kBases[] = "ACGT";

// Mean substitution rate of the TN generator before normalization.
double tn_mean_rate(const SeqSimConfig& cfg) {
  const auto& pi = cfg.base_freq;
  return 2.0 * pi[kBaseA] * pi[kBaseG] * cfg.alpha_purine +
         2.0 * pi[kBaseC] * pi[kBaseT] * cfg.alpha_pyrimidine +
         2.0 * (pi[kBaseA] + pi[kBaseG]) * (pi[kBaseC] + pi[kBaseT]) *
             cfg.beta_transversion;
}

}  // namespace

std::array<double, 16> subst_transition_matrix(const SeqSimConfig& cfg, double t) {
  std::array<double, 16> m{};
  if (cfg.model == SubstModel::jc) {
    const double p = 0.75 * (1.0 - std::exp(-4.0 / 3.0 * t));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m[i * 4 + j] = i == j ? 1.0 - p : p / 3.0;
    return m;
  }
  const auto& pi = cfg.base_freq;
  const double pr = pi[kBaseA] + pi[kBaseG];
  const double py = pi[kBaseC] + pi[kBaseT];
  const double scale = 1.0 / tn_mean_rate(cfg);  // one expected substitution per unit t
  const double ar = cfg.alpha_purine * scale;
  const double ay = cfg.alpha_pyrimidine * scale;
  const double b = cfg.beta_transversion * scale;
  const double eb = std::exp(-b * t);
  const double er = std::exp(-(pr * ar + py * b) * t);
  const double ey = std::exp(-(py * ay + pr * b) * t);
  for (int i = 0; i < 4; ++i) {
    const bool i_pur = i == kBaseA || i == kBaseG;
    for (int j = 0; j < 4; ++j) {
      const bool j_pur = j == kBaseA || j == kBaseG;
      const double pj = pi[j];
      double v;
      if (i_pur != j_pur) {
        v = pj * (1.0 - eb);
      } else if (i_pur) {
        if (i == j)
          v = pj + pj * (py / pr) * eb + ((pr - pj) / pr) * er;
        else
          v = pj + pj * (py / pr) * eb - (pj / pr) * er;
      } else {
        if (i == j)
          v = pj + pj * (pr / py) * eb + ((py - pj) / py) * ey;
        else
          v = pj + pj * (pr / py) * eb - (pj / py) * ey;
      }
      m[i * 4 + j] = v;
    }
  }
  return m;
}

SimSequence random_root_sequence(const SeqSimConfig& cfg, int length, Rng& rng) {
  SimSequence seq;
  seq.bases.reserve(length);
  seq.site_rate.reserve(length);
  std::gamma_distribution<double> site_gamma(cfg.gamma_shape, 1.0 / std::max(cfg.gamma_shape, 1e-12));
  for (int i = 0; i < length; ++i) {
    const double u = runif(rng);
    double acc = 0.0;
    int b = 3;
    for (int j = 0; j < 4; ++j) {
      acc += cfg.base_freq[j];
      if (u <= acc) {
        b = j;
        break;
      }
    }
    seq.bases.push_back(kBases[b]);
    seq.site_rate.push_back(cfg.gamma_shape > 0.0 ? site_gamma(rng) : 1.0);
  }
  return seq;
}

namespace {

void substitute_interval(SimSequence& seq, const SeqSimConfig& cfg, double dt, Rng& rng) {
  if (dt <= 0.0) return;
  for (std::size_t i = 0; i < seq.bases.size(); ++i) {
    const std::array<double, 16> m =
        subst_transition_matrix(cfg, dt * seq.site_rate[i]);
    const int from = base_index(seq.bases[i]);
    const double u = runif(rng);
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
      acc += m[from * 4 + j];
      if (u <= acc) {
        seq.bases[i] = kBases[j];
        break;
      }
    }
  }
}

}  // namespace

SimSequence evolve_sequence(const SimSequence& parent, const SeqSimConfig& cfg,
                            double edge_length, Rng& rng) {
  cfg.validate();
  SimSequence seq = parent;
  // Indels via Gillespie; substitutions applied over each event-free interval
  // so inserted bases evolve only from their insertion time onward.
  double t = 0.0;
  for (;;) {
    const std::size_t len = seq.bases.size();
    const double rate = (len + 1) * cfg.indel.lambda + len * cfg.indel.mu;
    const double dt = rexp(rng, rate);
    if (t + dt >= edge_length || seq.bases.empty()) {
      substitute_interval(seq, cfg, edge_length - t, rng);
      return seq;
    }
    substitute_interval(seq, cfg, dt, rng);
    t += dt;
    if (runif(rng) * rate < (len + 1) * cfg.indel.lambda) {
      const int link = runif_int(rng, 0, static_cast<int>(len));
      const int l = sample_geometric(rng, cfg.indel.r_geom);
      SimSequence insert = random_root_sequence(cfg, l, rng);
      seq.bases.insert(link, insert.bases);
      seq.site_rate.insert(seq.site_rate.begin() + link, insert.site_rate.begin(),
                           insert.site_rate.end());
    } else {
      const int link = runif_int(rng, 0, static_cast<int>(len) - 1);
      int l = sample_geometric(rng, cfg.indel.r_geom);
      l = std::min<int>(l, static_cast<int>(len) - link);  // truncate at the boundary
      seq.bases.erase(link, l);
      seq.site_rate.erase(seq.site_rate.begin() + link, seq.site_rate.begin() + link + l);
    }
  }
}

std::vector<SimSequence> simulate_sequences(const SeqSimConfig& cfg, const PhyloTree& tree,
                                            const SimSequence& root_seq, Rng& rng) {
  std::vector<SimSequence> at_node(tree.n_nodes());
  at_node[tree.root] = root_seq;
  for (int v : tree.preorder()) {
    if (v == tree.root) continue;
    at_node[v] = evolve_sequence(at_node[tree.nodes[v].parent], cfg,
                                 tree.edge_length[v], rng);
  }
  std::vector<SimSequence> leaves;
  for (int i = 0; i < tree.n_taxa(); ++i) leaves.push_back(std::move(at_node[i]));
  return leaves;
}

}  // namespace subid
