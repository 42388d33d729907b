#pragma once

#include <span>
#include <utility>
#include <vector>

namespace xmodal::stats {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion, clamped to [0, 1].
/// Throws StatsError if n == 0 or successes > n.
Interval wilson_ci(long successes, long n, double z = 1.96);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TestResult {
  double mean_diff = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;  ///< two-sided
  long dof = 0;
  double cohens_d = 0.0;
  bool adjusted_reject = false;  ///< filled in by the caller after correction
};

/// Paired t-test on the differences. Throws StatsError for fewer than two
/// values or zero variance.
TestResult paired_t_test(std::span<const double> diffs);

/// Step-down Holm procedure; decisions in the input order.
std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha);

/// Holm-adjusted p-values (monotone, capped at 1), input order.
std::vector<double> holm_adjusted(std::span<const double> p_values);

/// mean / sample sd. Throws StatsError for fewer than two values or zero variance.
double cohens_d(std::span<const double> diffs);

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

}  // namespace xmodal::stats
