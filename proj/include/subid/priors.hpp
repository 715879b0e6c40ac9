#pragma once

#include <vector>

#include "subid/common.hpp"
#include "subid/model.hpp"
#include "subid/tree.hpp"

namespace subid {

enum class LociModel { general, restricted };
enum class AncestorLengthPrior { geometric_middle, uniform_middle };

// All prior settings.  gamma/nu are exponential means for tree edges and the
// per-locus attached edge; loci_model picks the uniform-count general model
// or the negative-binomial restricted model.
struct PriorConfig {
  double gamma = 0.1;
  double nu = 0.1;
  LociModel loci_model = LociModel::restricted;
  int k_max = 100;             // general model: uniform on {1..k_max}
  double k_mean = 10.0;        // restricted model: negative binomial mean
  double k_variance = 1000.0;  // and variance (must exceed the mean)
  AncestorLengthPrior ancestor_length = AncestorLengthPrior::geometric_middle;
  double w = 0.95;             // middle-piece mass of the ancestor-length mixture
  int n_min = 11;
  int n_max = 586;
  double rho = 17.0 / 4096.0;
  double mu_shape = 4.0;       // mu ~ Gamma(shape, rate)
  double mu_rate = 100.0;
  double beta_a = 3.0;         // beta ~ Beta(a, b)
  double beta_b = 1.0;

  void validate() const;
};

// End-region pair prior: (7,9), (9,7), (9,9) with proportions 16:16:1.
double end_region_logprior(const EndRegions& end);
EndRegions sample_end_regions(Rng& rng);

// Three-piece mixture prior for the ancestor-node intermediate length: mass
// (1-w)/2 below n_min (reversed truncated geometric), w on [n_min, n_max]
// (truncated geometric or uniform), and (1-w)/2 above n_max (shifted
// geometric tail).
double ancestor_length_logpmf(int n, const PriorConfig& cfg);
int sample_ancestor_length(const PriorConfig& cfg, Rng& rng);

// Number-of-loci prior: uniform {1..k_max} (general) or negative binomial
// parametrized by (mean, variance) (restricted).
double loci_count_logpmf(int k, const PriorConfig& cfg);

// Uniform rooted topology plus independent Exp(gamma) edge lengths.  The
// per-locus attached edges contribute Exp(nu) terms via attached_edge_logprior.
double tree_logprior(const PhyloTree& tree, const PriorConfig& cfg);
double attached_edge_logprior(double length, const PriorConfig& cfg);

// Independent priors on (mu, beta, r) with lambda = mu * beta derived:
// r ~ Unif(0,1), mu ~ Gamma(shape, rate), beta ~ Beta(a, b).
double rate_logprior(const IndelParams& params, const PriorConfig& cfg);
IndelParams sample_rate_params(const PriorConfig& cfg, Rng& rng);

double exp_logpdf(double x, double mean);
double gamma_logpdf(double x, double shape, double rate);
double beta_logpdf(double x, double a, double b);

// Negative binomial pmf under the (mean, variance) parametrization.
double negbinom_logpmf(int k, double mean, double variance);
int sample_negbinom(double mean, double variance, Rng& rng);
int sample_loci_count(const PriorConfig& cfg, Rng& rng);

}  // namespace subid
