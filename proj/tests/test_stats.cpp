#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "xmodal/error.hpp"
#include "oracles.hpp"
#include "xmodal/stats.hpp"

using namespace xmodal;
using namespace xmodal::oracle;

namespace {

void check_holm_grid(int m, int k_max, long& cases) {
  std::vector<int> idx(static_cast<std::size_t>(m), 1);
  std::vector<double> p(static_cast<std::size_t>(m));
  while (true) {
    for (int i = 0; i < m; ++i) p[std::size_t(i)] = 0.005 * idx[std::size_t(i)];
    const auto got = stats::holm_bonferroni(p, 0.05);
    const auto want = holm_closed_testing(p, 0.05);
    if (got != want) {
      CAPTURE(p[0]);
      FAIL("holm mismatch");
    }
    const auto adj = stats::holm_adjusted(p);
    const auto adj_want = holm_adjusted_oracle(p);
    for (int i = 0; i < m; ++i)
      if (std::abs(adj[std::size_t(i)] - adj_want[std::size_t(i)]) > 1e-12) FAIL("adjusted mismatch");
    ++cases;
    int pos = 0;
    while (pos < m && ++idx[std::size_t(pos)] > k_max) idx[std::size_t(pos++)] = 1;
    if (pos == m) break;
  }
}

}  // namespace

TEST_CASE("wilson_ci against a 50-digit evaluation") {
  int cases = 0;
  for (long n : {1L, 7L, 50L, 200L, 1000L}) {
    for (int j = 0; j < 10; ++j) {
      const long k = (n * j) / 9;
      const auto got = stats::wilson_ci(k, n, 1.96);
      const auto want = wilson_oracle(k, n, 1.96);
      CAPTURE(k);
      CAPTURE(n);
      CHECK(std::abs(got.lo - want.lo) < 1e-9);
      CHECK(std::abs(got.hi - want.hi) < 1e-9);
      ++cases;
    }
  }
  CHECK(cases == 50);
  const auto full = stats::wilson_ci(1000, 1000, 1.96);
  CHECK(std::abs(full.lo - 0.9962) < 5e-5);
  CHECK(full.hi == 1.0);
  CHECK(stats::wilson_ci(0, 50, 1.96).lo == 0.0);
  const auto half = stats::wilson_ci(50, 100, 1.96);
  CHECK(std::abs(half.lo - 0.4038) < 1e-4);
  CHECK(std::abs(half.hi - 0.5962) < 1e-4);
  CHECK_THROWS_AS(stats::wilson_ci(0, 0, 1.96), StatsError);
}

TEST_CASE("incomplete_beta against boost") {
  for (double a : {0.5, 1.0, 1.5, 2.5, 15.0, 499.5})
    for (double b : {0.5, 1.0, 3.0, 40.0})
      for (double x : {0.0, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0}) {
        CAPTURE(a);
        CAPTURE(b);
        CAPTURE(x);
        CHECK(std::abs(stats::incomplete_beta(a, b, x) - boost::math::ibeta(a, b, x)) < 1e-12);
      }
}

TEST_CASE("student t CDF against Monte Carlo") {
  std::mt19937_64 gen(20261016);
  for (double dof : {3.0, 30.0, 999.0}) {
    std::student_t_distribution<double> dist(dof);
    std::vector<double> draws(200000);
    for (auto& d : draws) d = dist(gen);
    std::sort(draws.begin(), draws.end());
    for (double t : {-4.0, -2.0, -1.0, -0.3, 0.0, 0.5, 1.3, 2.2, 3.5}) {
      const double empirical =
          double(std::upper_bound(draws.begin(), draws.end(), t) - draws.begin()) / draws.size();
      CAPTURE(dof);
      CAPTURE(t);
      CHECK(std::abs(stats::student_t_cdf(t, dof) - empirical) < 0.01);
    }
  }
  // Exact CDF values from the incomplete beta identity.
  for (double dof : {3.0, 30.0, 999.0})
    for (double t : {-2.5, 0.7, 4.0}) {
      const double tail = 0.5 * boost::math::ibeta(dof / 2, 0.5, dof / (dof + t * t));
      CHECK(std::abs(stats::student_t_cdf(t, dof) - (t > 0 ? 1 - tail : tail)) < 1e-10);
    }
}

TEST_CASE("paired t-test") {
  const std::vector<double> d = {0.1, 0.2, 0.3};
  const auto r = stats::paired_t_test(d);
  CHECK(r.t_stat == doctest::Approx(3.4641).epsilon(1e-4));
  CHECK(r.p_value == doctest::Approx(0.0742).epsilon(1e-3));
  CHECK(r.dof == 2);
  const auto sym = stats::paired_t_test(std::vector<double>{-1.0, 1.0});
  CHECK(sym.t_stat == 0.0);
  CHECK(sym.p_value == doctest::Approx(1.0));
  CHECK_THROWS_AS(stats::paired_t_test(std::vector<double>{0.5, 0.5, 0.5}), StatsError);
}

TEST_CASE("cohens_d") {
  CHECK(stats::cohens_d(std::vector<double>{1, 1, 1, -1}) == doctest::Approx(0.5));
  CHECK(stats::cohens_d(std::vector<double>{2, -2}) == 0.0);
  CHECK_THROWS_AS(stats::cohens_d(std::vector<double>{1, 1}), StatsError);
}

TEST_CASE("holm_bonferroni examples") {
  CHECK(stats::holm_bonferroni(std::vector<double>{0.001, 0.02, 0.04}, 0.05) == std::vector<bool>{true, true, true});
  CHECK(stats::holm_bonferroni(std::vector<double>{0.03, 0.04}, 0.05) == std::vector<bool>{false, false});
  CHECK(stats::holm_bonferroni(std::vector<double>{1.0}, 0.05) == std::vector<bool>{false});
}

TEST_CASE("holm_bonferroni against closed testing on the 0.005 grid") {
  long cases = 0;
  check_holm_grid(1, 200, cases);
  check_holm_grid(2, 200, cases);
  check_holm_grid(3, 200, cases);
  // Above alpha every p behaves the same, so 0.005..0.1 covers every
  // decision pattern for m = 4.
  check_holm_grid(4, 20, cases);
  CHECK(cases == 200 + 200 * 200 + 200 * 200 * 200 + 20 * 20 * 20 * 20);
}
