#include <cmath>
#include <vector>

#include "doctest.h"
#include "subid/kernels.hpp"

using namespace subid;

namespace {

std::vector<double> mat_mul(const std::vector<double>& a, const std::vector<double>& b,
                            int n) {
  std::vector<double> c(n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) c[i * n + j] += a[i * n + k] * b[k * n + j];
  return c;
}

}  // namespace

TEST_CASE("mismatch matrix basics: identity at t=0, rows sum to one") {
  for (int r : {16, 18}) {
    const MismatchMatrix id = mismatch_matrix(r, 0.0);
    for (int i = 0; i <= r; ++i)
      for (int j = 0; j <= r; ++j) CHECK(id(i, j) == (i == j ? 1.0 : 0.0));

    for (double t : {0.05, 0.4, 2.0}) {
      const MismatchMatrix m = mismatch_matrix(r, t);
      for (int i = 0; i <= r; ++i) {
        double s = 0.0;
        for (int j = 0; j <= r; ++j) {
          CHECK(m(i, j) >= 0.0);
          s += m(i, j);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
      // P_00 = (1-p)^r
      CHECK(m(0, 0) == doctest::Approx(std::pow(1.0 - m.p, r)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(mismatch_matrix(16, -0.1), std::invalid_argument);
}

TEST_CASE("mismatch matrix satisfies Chapman-Kolmogorov") {
  const int r = 16;
  const double s = 0.1, t = 0.3;
  const MismatchMatrix ms = mismatch_matrix(r, s);
  const MismatchMatrix mt = mismatch_matrix(r, t);
  const MismatchMatrix mst = mismatch_matrix(r, s + t);
  const std::vector<double> prod = mat_mul(ms.entries, mt.entries, r + 1);
  for (int i = 0; i <= r; ++i)
    for (int j = 0; j <= r; ++j)
      CHECK(prod[i * (r + 1) + j] == doctest::Approx(mst(i, j)).epsilon(1e-10));
}

TEST_CASE("mismatch stationary distribution") {
  for (int r : {16, 18}) {
    const std::vector<double> pi = mismatch_stationary(r);
    CHECK(pi[0] == doctest::Approx(std::pow(0.25, r)));
    double s = 0.0;
    for (double v : pi) s += v;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    // pi P(t) = pi by direct multiplication
    const MismatchMatrix m = mismatch_matrix(r, 0.5);
    for (int j = 0; j <= r; ++j) {
      double acc = 0.0;
      for (int i = 0; i <= r; ++i) acc += pi[i] * m(i, j);
      CHECK(acc == doctest::Approx(pi[j]).epsilon(1e-10));
    }
  }
}

TEST_CASE("mismatch rows converge to the stationary law") {
  const int r = 16;
  const MismatchMatrix m = mismatch_matrix(r, 50.0);
  const std::vector<double> pi = mismatch_stationary(r);
  for (int i : {0, 5, 16})
    for (int j = 0; j <= r; ++j)
      CHECK(m(i, j) == doctest::Approx(pi[j]).epsilon(1e-8).scale(1.0));
}

TEST_CASE("mismatch process factorizes over independent blocks") {
  // Starting from zero mismatches on 16 sites, the mismatch-count law is the
  // convolution of independent 7- and 9-site processes.
  const double t = 0.37;
  const MismatchMatrix m16 = mismatch_matrix(16, t);
  const MismatchMatrix m7 = mismatch_matrix(7, t);
  const MismatchMatrix m9 = mismatch_matrix(9, t);
  for (int j = 0; j <= 16; ++j) {
    double conv = 0.0;
    for (int a = 0; a <= std::min(j, 7); ++a)
      if (j - a <= 9) conv += m7(0, a) * m9(0, j - a);
    CHECK(m16(0, j) == doctest::Approx(conv).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("cutter stationary probability") {
  CHECK(cutter_stationary(5) ==
        doctest::Approx(std::pow(1.0 - 1.0 / 256.0, 2)).epsilon(1e-12));
  CHECK(cutter_stationary(50) ==
        doctest::Approx(std::pow(1.0 - 1.0 / 256.0, 47) *
                        std::pow(1.0 - 1.0 / 4096.0, 45))
            .epsilon(1e-12));
  CHECK(cutter_stationary(50) == doctest::Approx(0.8228).epsilon(1e-3));
  double prev = 1.0;
  for (int n = 1; n <= 100; ++n) {
    CHECK(cutter_stationary(n) <= prev + 1e-15);
    prev = cutter_stationary(n);
  }
  CHECK_THROWS_AS(cutter_stationary(0), std::invalid_argument);
}

TEST_CASE("cutter rate q01") {
  CHECK(cutter_rate01(5) == doctest::Approx(8.0 / 255.0).epsilon(1e-12));
  CHECK(cutter_rate01(50) ==
        doctest::Approx(4.0 * 47 / 255.0 + 6.0 * 45 / 4095.0).epsilon(1e-12));
  // linear in n for n >= 5
  const double slope = 4.0 / 255.0 + 6.0 / 4095.0;
  for (int n = 6; n < 30; ++n)
    CHECK(cutter_rate01(n) - cutter_rate01(n - 1) == doctest::Approx(slope).epsilon(1e-12));
}

TEST_CASE("cutter matrix: identity, rows, stationarity, convergence") {
  const CutterKernel id = cutter_matrix(0.0, 40);
  CHECK(id(0, 0) == doctest::Approx(1.0));
  CHECK(id(1, 1) == doctest::Approx(1.0));

  for (int n : {1, 4, 7, 100}) {
    for (double t : {0.01, 0.7, 3.0}) {
      const CutterKernel k = cutter_matrix(t, n);
      CHECK(k(0, 0) + k(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(k(1, 0) + k(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  const CutterKernel k = cutter_matrix(0.7, 100);
  const double pi0 = cutter_stationary(100);
  CHECK(pi0 * k(0, 0) + (1 - pi0) * k(1, 0) == doctest::Approx(pi0).epsilon(1e-12));
  CHECK(pi0 * k(0, 1) + (1 - pi0) * k(1, 1) == doctest::Approx(1 - pi0).epsilon(1e-12));

  const CutterKernel far = cutter_matrix(60.0, 100);
  CHECK(far(0, 0) == doctest::Approx(pi0).epsilon(1e-8));
  CHECK(far(1, 0) == doctest::Approx(pi0).epsilon(1e-8));

  // Chapman-Kolmogorov at fixed n
  const CutterKernel a = cutter_matrix(0.2, 64);
  const CutterKernel b = cutter_matrix(0.5, 64);
  const CutterKernel c = cutter_matrix(0.7, 64);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(a(i, 0) * b(0, j) + a(i, 1) * b(1, j) ==
            doctest::Approx(c(i, j)).epsilon(1e-12));
}

TEST_CASE("history-conditioned cutter kernel") {
  EndRegions end{7, 9};
  IndelHistory empty;
  const CutterKernel base = cutter_matrix(0.9, 33);
  const CutterKernel cond = cutter_matrix_given_history(empty, 0.9, 33, end);
  for (int i = 0; i < 4; ++i)
    CHECK(cond.entries[i] == doctest::Approx(base.entries[i]).epsilon(1e-14));

  // one insertion halfway: still a stochastic matrix
  IndelHistory one;
  one.events.push_back({0.45, EventKind::insertion, 7, 12});
  const CutterKernel k = cutter_matrix_given_history(one, 0.9, 33, end);
  CHECK(k(0, 0) + k(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(k(1, 0) + k(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // splitting an event-free interval anywhere leaves the product unchanged
  IndelHistory split;
  split.events.push_back({0.2, EventKind::insertion, 7, 5});
  const CutterKernel whole = cutter_matrix_given_history(split, 1.4, 20, end);
  // same history, but evaluate as product over a hand-split timeline
  const CutterKernel part1 = cutter_matrix(0.2, 20);
  const CutterKernel part2a = cutter_matrix(0.63, 25);
  const CutterKernel part2b = cutter_matrix(1.4 - 0.2 - 0.63, 25);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double two = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          two += part1(i, a) * part2a(a, b) * part2b(b, j);
      CHECK(whole(i, j) == doctest::Approx(two).epsilon(1e-12));
    }

  IndelHistory kill;
  kill.events.push_back({0.2, EventKind::deletion_in_end, 0, 1});
  CHECK_THROWS_AS(cutter_matrix_given_history(kill, 1.0, 20, end),
                  std::invalid_argument);
}

TEST_CASE("mismatch cache returns identical matrices") {
  MismatchCache cache;
  const MismatchMatrix& a = cache.get(16, 0.25);
  const MismatchMatrix direct = mismatch_matrix(16, 0.25);
  for (std::size_t i = 0; i < direct.entries.size(); ++i)
    CHECK(a.entries[i] == direct.entries[i]);
  CHECK(&cache.get(16, 0.25) == &a);
  cache.get(18, 0.25);
  CHECK(cache.size() == 2);
}
