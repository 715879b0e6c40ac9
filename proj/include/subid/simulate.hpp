#pragma once

#include <array>
#include <string>
#include <vector>

#include "subid/likelihood.hpp"
#include "subid/marker_data.hpp"
#include "subid/priors.hpp"
#include "subid/tree.hpp"

namespace subid {

// Exact forward simulation of the single-fragment indel process: exponential
// waiting times at the current total rate, kinds proportional to their
// category rates, stopping at the first killing event or at the edge end.
IndelHistory simulate_edge_history(int n0, const EndRegions& end, double edge_length,
                                   const IndelParams& params, Rng& rng);

// Samples (M, Z) at the child end of an edge given the parent state and the
// edge's indel history.
NodeMZ simulate_edge_mz(NodeMZ parent, const IndelHistory& h, double edge_length,
                        int n_parent, const EndRegions& end, Rng& rng);

// Draws a complete augmented locus from the model prior: end regions and
// ancestor length from their priors, an Exp(nu) attached edge, then histories
// and node states down the tree.
AugmentedLocus simulate_locus(const PhyloTree& tree, const PriorConfig& priors,
                              const IndelParams& params, int plate, Rng& rng);

struct SimulatedDataset {
  std::vector<AugmentedLocus> loci;
  LocusAssignment y;
  MarkerMatrix x;
};

// Simulates n_loci independent loci and derives the observable marker matrix.
// Loci producing no markers anywhere are kept in y (the x matrix ignores them).
SimulatedDataset simulate_dataset(const PhyloTree& tree, const PriorConfig& priors,
                                  const IndelParams& params, int n_loci, Rng& rng);

enum class SubstModel { jc, tn };

// Sequence-level simulator configuration.  The substitution process is JC or
// Tamura-Nei with optional gamma-distributed site rates; indels follow the
// same per-link Poisson/geometric process as the fragment model.
struct SeqSimConfig {
  SubstModel model = SubstModel::jc;
  std::array<double, 4> base_freq{0.25, 0.25, 0.25, 0.25};  // A, C, G, T
  double alpha_purine = 1.0;      // A<->G transition rate factor
  double alpha_pyrimidine = 1.0;  // C<->T transition rate factor
  double beta_transversion = 1.0;
  double gamma_shape = 0.0;       // 0 disables site-rate variation
  IndelParams indel;

  void validate() const;
};

struct SimSequence {
  std::string bases;
  std::vector<double> site_rate;  // per-site rate multipliers
};

// 4x4 substitution transition matrix at time t (JC or TN), row-major A,C,G,T.
std::array<double, 16> subst_transition_matrix(const SeqSimConfig& cfg, double t);

SimSequence random_root_sequence(const SeqSimConfig& cfg, int length, Rng& rng);

// Evolves one sequence along an edge: per-site substitution plus indels with
// geometric lengths at uniform links.  Deletions overhanging either end are
// truncated at the sequence boundary.
SimSequence evolve_sequence(const SimSequence& parent, const SeqSimConfig& cfg,
                            double edge_length, Rng& rng);

// Evolves a root sequence down a tree; returns one sequence per taxon.
std::vector<SimSequence> simulate_sequences(const SeqSimConfig& cfg, const PhyloTree& tree,
                                            const SimSequence& root_seq, Rng& rng);

}  // namespace subid
