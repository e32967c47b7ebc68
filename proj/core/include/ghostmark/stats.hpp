#pragma once

#include <span>
#include <vector>

namespace ghostmark {

/// F-test outcome plus the sum-of-squares decomposition behind it. For the
/// one-way design ss_subjects is 0 and ss_total = ss_between + ss_within;
/// for the repeated-measures design ss_between holds the condition effect,
/// ss_within the error term, and ss_total = ss_between + ss_subjects +
/// ss_within.
struct AnovaResult {
  double f_stat = 0.0;
  long df_between = 0;
  long df_within = 0;
  double p_value = 1.0;
  double eta_p_squared = 0.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ss_subjects = 0.0;
  double ss_total = 0.0;
};

struct EffectSize {
  double cohens_d = 0.0;
  double pooled_sd = 0.0;
};

/// Classic equal-variance between/within decomposition. Every group needs
/// at least two values; all-equal data is rejected as degenerate.
AnovaResult one_way_anova(std::span<const std::vector<double>> groups);

/// Within-subject decomposition over a complete subjects x conditions grid.
/// F compares the condition effect against subject-by-condition error with
/// dfs (c-1) and (c-1)(n-1). No sphericity correction.
AnovaResult repeated_measures_anova(const std::vector<std::vector<double>>& grid);

/// Pooled-SD (Bessel-corrected) Cohen's d of a over b.
EffectSize cohens_d(std::span<const double> sample_a, std::span<const double> sample_b);

/// Product-moment correlation; requires equal lengths >= 2, nonzero variances.
double pearson_r(std::span<const double> xs, std::span<const double> ys);

/// CDF of the F distribution via the regularized incomplete beta function.
/// Monotone nondecreasing in x; exact 0 at x <= 0.
double f_cdf(double x, long df1, long df2);

}  // namespace ghostmark
