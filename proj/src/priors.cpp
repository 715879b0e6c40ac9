#include "subid/priors.hpp"

#include <cmath>

namespace subid {

void PriorConfig::validate() const {
  SUBID_REQUIRE(gamma > 0.0 && nu > 0.0, "gamma and nu must be positive");
  SUBID_REQUIRE(w > 0.0 && w < 1.0, "w must lie in (0,1)");
  SUBID_REQUIRE(n_min >= 2 && n_min < n_max, "need 2 <= n_min < n_max");
  SUBID_REQUIRE(rho > 0.0 && rho < 1.0, "rho must lie in (0,1)");
  SUBID_REQUIRE(k_max >= 1, "k_max must be >= 1");
  SUBID_REQUIRE(k_variance > k_mean && k_mean > 0.0,
                "negative binomial needs variance > mean > 0");
}

double end_region_logprior(const EndRegions& end) {
  SUBID_REQUIRE(end.valid(), "invalid end-region pair");
  if (end.r_left == 9 && end.r_right == 9) return std::log(1.0 / 33.0);
  return std::log(16.0 / 33.0);
}

EndRegions sample_end_regions(Rng& rng) {
  const double u = runif(rng) * 33.0;
  if (u < 16.0) return {7, 9};
  if (u < 32.0) return {9, 7};
  return {9, 9};
}

double ancestor_length_logpmf(int n, const PriorConfig& cfg) {
  SUBID_REQUIRE(n >= 1, "length must be >= 1");
  const double rho = cfg.rho;
  const double l1r = std::log1p(-rho);
  const double half_tail = std::log((1.0 - cfg.w) / 2.0);
  if (n < cfg.n_min) {
    const double log_norm = std::log1p(-std::exp((cfg.n_min - 1) * l1r));
    return half_tail + std::log(rho) + (cfg.n_min - n - 1) * l1r - log_norm;
  }
  if (n <= cfg.n_max) {
    if (cfg.ancestor_length == AncestorLengthPrior::uniform_middle)
      return std::log(cfg.w) - std::log(static_cast<double>(cfg.n_max - cfg.n_min + 1));
    const double log_norm = std::log1p(-std::exp((cfg.n_max - cfg.n_min + 1) * l1r));
    return std::log(cfg.w) + std::log(rho) + (n - cfg.n_min) * l1r - log_norm;
  }
  return half_tail + std::log(rho) + (n - cfg.n_max - 1) * l1r;
}

int sample_ancestor_length(const PriorConfig& cfg, Rng& rng) {
  const double u = runif(rng);
  const double lo = (1.0 - cfg.w) / 2.0;
  if (u < lo) return cfg.n_min - sample_trunc_geometric(rng, cfg.rho, cfg.n_min - 1);
  if (u < lo + cfg.w) {
    if (cfg.ancestor_length == AncestorLengthPrior::uniform_middle)
      return runif_int(rng, cfg.n_min, cfg.n_max);
    return cfg.n_min - 1 + sample_trunc_geometric(rng, cfg.rho, cfg.n_max - cfg.n_min + 1);
  }
  return cfg.n_max + sample_geometric(rng, cfg.rho);
}

double negbinom_logpmf(int k, double mean, double variance) {
  SUBID_REQUIRE(variance > mean && mean > 0.0, "need variance > mean > 0");
  if (k < 0) return kNegInf;
  const double size = mean * mean / (variance - mean);
  const double p = mean / variance;
  return std::lgamma(k + size) - std::lgamma(size) - std::lgamma(k + 1.0) +
         size * std::log(p) + k * std::log1p(-p);
}

int sample_negbinom(double mean, double variance, Rng& rng) {
  const double size = mean * mean / (variance - mean);
  const double p = mean / variance;
  std::gamma_distribution<double> gamma(size, (1.0 - p) / p);
  std::poisson_distribution<int> pois(gamma(rng));
  return pois(rng);
}

double loci_count_logpmf(int k, const PriorConfig& cfg) {
  if (cfg.loci_model == LociModel::general) {
    if (k < 1 || k > cfg.k_max) return kNegInf;
    return -std::log(static_cast<double>(cfg.k_max));
  }
  return negbinom_logpmf(k, cfg.k_mean, cfg.k_variance);
}

int sample_loci_count(const PriorConfig& cfg, Rng& rng) {
  if (cfg.loci_model == LociModel::general) return runif_int(rng, 1, cfg.k_max);
  return sample_negbinom(cfg.k_mean, cfg.k_variance, rng);
}

double exp_logpdf(double x, double mean) {
  if (x <= 0.0) return kNegInf;
  return -std::log(mean) - x / mean;
}

double gamma_logpdf(double x, double shape, double rate) {
  if (x <= 0.0) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) -
         rate * x;
}

double beta_logpdf(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return kNegInf;
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
         (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

double tree_logprior(const PhyloTree& tree, const PriorConfig& cfg) {
  double lp = -log_num_rooted_topologies(tree.n_taxa());
  for (int v = 0; v < tree.n_nodes(); ++v) {
    if (v == tree.root) continue;
    if (!(tree.edge_length[v] > 0.0)) return kNegInf;
    lp += exp_logpdf(tree.edge_length[v], cfg.gamma);
  }
  return lp;
}

double attached_edge_logprior(double length, const PriorConfig& cfg) {
  return exp_logpdf(length, cfg.nu);
}

double rate_logprior(const IndelParams& params, const PriorConfig& cfg) {
  if (params.r_geom <= 0.0 || params.r_geom >= 1.0) return kNegInf;
  return gamma_logpdf(params.mu, cfg.mu_shape, cfg.mu_rate) +
         beta_logpdf(params.beta, cfg.beta_a, cfg.beta_b);
}

IndelParams sample_rate_params(const PriorConfig& cfg, Rng& rng) {
  std::gamma_distribution<double> gmu(cfg.mu_shape, 1.0 / cfg.mu_rate);
  std::gamma_distribution<double> ga(cfg.beta_a, 1.0);
  std::gamma_distribution<double> gb(cfg.beta_b, 1.0);
  const double mu = gmu(rng);
  const double xa = ga(rng);
  const double xb = gb(rng);
  const double beta = xa / (xa + xb);
  double r = runif(rng);
  if (r <= 0.0 || r >= 1.0) r = 0.5;
  return IndelParams::from_mu_beta(mu, beta, r);
}

}  // namespace subid
