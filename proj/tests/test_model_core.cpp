#include <cmath>

#include "doctest.h"
#include "subid/model.hpp"

using namespace subid;

namespace {

// Independent oracle: sum the per-category event rates one by one.
double category_rate_sum(const EndRegions& end, int n, const IndelParams& p) {
  const double ins_mid = (n + 1) * p.lambda;
  const double ins_end = (end.total() - 2) * p.lambda;
  const double del_mid = n * p.mu;
  const double del_end = end.total() * p.mu;
  const double del_before = p.mu * (1.0 - p.r_geom) / p.r_geom;
  return ins_mid + ins_end + del_mid + del_end + del_before;
}

// Oracle for the long-deletion rate: truncate the double sum over negative
// start positions at -200.
double long_deletion_series(double mu, double r) {
  double acc = 0.0;
  for (int i = 1; i <= 200; ++i) {
    // deletions at position -i with length > i
    double tail = std::pow(1.0 - r, i);  // sum_{j>i} r(1-r)^{j-1}
    acc += tail;
  }
  return mu * acc;
}

}  // namespace

TEST_CASE("total_indel_rate matches the category-sum oracle") {
  EndRegions end{7, 9};
  IndelParams p = IndelParams::from_mu_beta(0.031, 0.025 / 0.031, 0.1);
  CHECK(p.lambda == doctest::Approx(0.025));
  CHECK(total_indel_rate(end, 50, p) == doctest::Approx(3.95).epsilon(1e-12));
  CHECK(total_indel_rate(end, 50, p) ==
        doctest::Approx(category_rate_sum(end, 50, p)).epsilon(1e-12));

  for (int n : {1, 2, 7, 123}) {
    for (double r : {0.05, 0.4, 1.0}) {
      IndelParams q = IndelParams::from_mu_beta(0.2, 0.7, r);
      CHECK(total_indel_rate(end, n, q) ==
            doctest::Approx(category_rate_sum(end, n, q)).epsilon(1e-12));
    }
  }
}

TEST_CASE("total_indel_rate trivial and degenerate cases") {
  EndRegions end{9, 9};
  IndelParams zero;
  zero.r_geom = 0.3;
  CHECK(total_indel_rate(end, 10, zero) == 0.0);

  IndelParams r1 = IndelParams::from_mu_beta(0.5, 0.2, 1.0);
  // (R+N-1) lambda + (R+N) mu when r = 1
  CHECK(total_indel_rate(end, 10, r1) ==
        doctest::Approx((18 + 10 - 1) * r1.lambda + (18 + 10) * r1.mu));

  CHECK_THROWS_AS(total_indel_rate(end, 0, r1), std::invalid_argument);
  IndelParams bad;
  bad.r_geom = 0.0;
  CHECK_THROWS_AS(total_indel_rate(end, 5, bad), std::invalid_argument);
}

TEST_CASE("total_indel_rate is strictly increasing in n, lambda, mu") {
  EndRegions end{7, 9};
  IndelParams p = IndelParams::from_mu_beta(0.3, 0.5, 0.2);
  double prev = total_indel_rate(end, 1, p);
  for (int n = 2; n < 40; ++n) {
    double cur = total_indel_rate(end, n, p);
    CHECK(cur > prev);
    prev = cur;
  }
  IndelParams more_mu = IndelParams::from_mu_beta(0.4, 0.5 * 0.3 / 0.4, 0.2);
  CHECK(total_indel_rate(end, 10, more_mu) > total_indel_rate(end, 10, p));
}

TEST_CASE("long_deletion_rate closed form vs series oracle") {
  IndelParams p;
  p.mu = 1.0;
  p.r_geom = 0.5;
  CHECK(long_deletion_rate(p) == doctest::Approx(1.0));

  p.mu = 0.031;
  p.r_geom = 0.1;
  CHECK(long_deletion_rate(p) == doctest::Approx(0.279).epsilon(1e-9));
  CHECK(long_deletion_rate(p) ==
        doctest::Approx(long_deletion_series(p.mu, p.r_geom)).epsilon(1e-9));

  p.r_geom = 1.0;
  CHECK(long_deletion_rate(p) == 0.0);
  p.r_geom = 0.0;
  CHECK_THROWS_AS(long_deletion_rate(p), std::invalid_argument);
}

TEST_CASE("geometric length log-pmf") {
  CHECK(indel_length_logpmf(1, 0.3) == doctest::Approx(std::log(0.3)));
  CHECK(indel_length_logpmf(3, 0.5) == doctest::Approx(std::log(0.125)));
  CHECK_THROWS_AS(indel_length_logpmf(0, 0.3), std::invalid_argument);

  double total = 0.0;
  for (int l = 1; l <= 2000; ++l) total += std::exp(indel_length_logpmf(l, 0.17));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  for (int n : {1, 4, 9}) {
    double tr = 0.0;
    for (int l = 1; l <= n; ++l) tr += std::exp(trunc_geometric_logpmf(l, 0.23, n));
    CHECK(tr == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(trunc_geometric_logpmf(5, 0.23, 4) == subid::kNegInf);
}

TEST_CASE("length samplers match their pmfs") {
  Rng rng(20240811);
  const double r = 0.35;
  const int trials = 200000;
  std::vector<int> counts(12, 0);
  for (int i = 0; i < trials; ++i) {
    int l = sample_geometric(rng, r);
    if (l < 12) ++counts[l];
  }
  for (int l = 1; l <= 6; ++l) {
    const double expect = trials * std::exp(indel_length_logpmf(l, r));
    CHECK(std::abs(counts[l] - expect) < 4.0 * std::sqrt(expect));
  }

  const int bound = 5;
  counts.assign(bound + 1, 0);
  for (int i = 0; i < trials; ++i) ++counts[sample_trunc_geometric(rng, r, bound)];
  for (int l = 1; l <= bound; ++l) {
    const double expect = trials * std::exp(trunc_geometric_logpmf(l, r, bound));
    CHECK(std::abs(counts[l] - expect) < 4.0 * std::sqrt(expect));
  }
}

TEST_CASE("history replay tracks lengths and rejects invalid sequences") {
  EndRegions end{7, 9};
  IndelHistory h;
  h.events.push_back({0.1, EventKind::insertion, 7, 3});
  h.events.push_back({0.2, EventKind::deletion, 9, 2});
  const auto lengths = replay_history(h, 5, end, 1.0);
  CHECK(lengths == std::vector<int>{5, 8, 6});

  // deletion reaching the right end must be tagged -1_N
  IndelHistory bad = h;
  bad.events.push_back({0.3, EventKind::deletion, 7 + 4, 5});
  CHECK_THROWS_AS(replay_history(bad, 5, end, 1.0), std::invalid_argument);
  bad.events.back().kind = EventKind::deletion_into_right_end;
  CHECK_NOTHROW(replay_history(bad, 5, end, 1.0));

  // killing event not last
  IndelHistory mid_kill;
  mid_kill.events.push_back({0.1, EventKind::deletion_in_end, 0, 1});
  mid_kill.events.push_back({0.2, EventKind::insertion, 7, 1});
  CHECK_THROWS_AS(replay_history(mid_kill, 5, end, 1.0), std::invalid_argument);

  // unsorted times
  IndelHistory unsorted;
  unsorted.events.push_back({0.4, EventKind::insertion, 7, 1});
  unsorted.events.push_back({0.2, EventKind::insertion, 7, 1});
  CHECK_THROWS_AS(replay_history(unsorted, 5, end, 1.0), std::invalid_argument);

  // a deletion can never empty the intermediate region
  IndelHistory empties;
  empties.events.push_back({0.1, EventKind::deletion, 7, 5});
  CHECK_THROWS_AS(replay_history(empties, 5, end, 1.0), std::invalid_argument);
  IndelHistory keeps_one;
  keeps_one.events.push_back({0.1, EventKind::deletion, 7, 4});
  CHECK(replay_history(keeps_one, 5, end, 1.0).back() == 1);
}

TEST_CASE("replay keeps N >= 1 on random valid histories") {
  Rng rng(7);
  EndRegions end{9, 7};
  for (int rep = 0; rep < 200; ++rep) {
    int n = runif_int(rng, 1, 30);
    const int n0 = n;
    IndelHistory h;
    double t = 0.0;
    for (int e = 0; e < 6; ++e) {
      t += runif(rng, 0.01, 0.1);
      if (runif(rng) < 0.5) {
        const int s = runif_int(rng, end.r_left, end.r_left + n);
        const int l = runif_int(rng, 1, 5);
        h.events.push_back({t, EventKind::insertion, s, l});
        n += l;
      } else if (n >= 2) {
        const int s = runif_int(rng, end.r_left, end.r_left + n - 1);
        const int bound = max_nonkill_deletion(end, n, s);
        if (bound < 1) continue;
        const int l = runif_int(rng, 1, bound);
        h.events.push_back({t, EventKind::deletion, s, l});
        n -= l;
      }
    }
    const auto lengths = replay_history(h, n0, end, 1.0);
    for (std::size_t i = 0; i + (h.has_kill() ? 1 : 0) < lengths.size(); ++i)
      CHECK(lengths[i] >= 1);
  }
}
