#include "ghostmark/stats.hpp"

#include <cmath>
#include <cstddef>
#include <limits>

#include "ghostmark/errors.hpp"

namespace ghostmark {

namespace {

// Continued fraction for the regularized incomplete beta function
// (Lentz's method, as in the usual betacf formulation).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;

  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                  a * std::log(x) + b * std::log1p(-x);
  double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double sample_mean(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double f_to_p(double f_stat, long df1, long df2) {
  if (!std::isfinite(f_stat)) return 0.0;
  return 1.0 - f_cdf(f_stat, df1, df2);
}

}  // namespace

double f_cdf(double x, long df1, long df2) {
  if (df1 < 1 || df2 < 1) {
    throw ValidationError("f_cdf: degrees of freedom must be >= 1");
  }
  if (x <= 0.0) return 0.0;
  double d1 = static_cast<double>(df1);
  double d2 = static_cast<double>(df2);
  double u = d1 * x / (d1 * x + d2);
  return incomplete_beta(d1 / 2.0, d2 / 2.0, u);
}

AnovaResult one_way_anova(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) {
    throw ValidationError("one_way_anova: need at least two groups");
  }
  std::size_t total_n = 0;
  double total_sum = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) {
      throw ValidationError("one_way_anova: every group needs at least two values");
    }
    total_n += g.size();
    for (double v : g) total_sum += v;
  }
  double grand_mean = total_sum / static_cast<double>(total_n);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    double mean = sample_mean(g);
    ss_between += static_cast<double>(g.size()) * (mean - grand_mean) * (mean - grand_mean);
    for (double v : g) ss_within += (v - mean) * (v - mean);
  }
  double ss_total = ss_between + ss_within;
  if (ss_total == 0.0) {
    throw ValidationError("one_way_anova: all values equal (no variance)");
  }

  AnovaResult r;
  r.df_between = static_cast<long>(groups.size()) - 1;
  r.df_within = static_cast<long>(total_n) - static_cast<long>(groups.size());
  r.ss_between = ss_between;
  r.ss_within = ss_within;
  r.ss_total = ss_total;
  double ms_between = ss_between / static_cast<double>(r.df_between);
  double ms_within = ss_within / static_cast<double>(r.df_within);
  if (ms_within == 0.0) {
    // Groups internally constant but means differ: perfect separation.
    r.f_stat = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.eta_p_squared = 1.0;
    return r;
  }
  r.f_stat = ms_between / ms_within;
  r.p_value = f_to_p(r.f_stat, r.df_between, r.df_within);
  r.eta_p_squared = ss_between / (ss_between + ss_within);
  return r;
}

AnovaResult repeated_measures_anova(const std::vector<std::vector<double>>& grid) {
  const std::size_t n_subjects = grid.size();
  if (n_subjects < 2) {
    throw ValidationError("repeated_measures_anova: need at least two subjects");
  }
  const std::size_t n_conditions = grid.front().size();
  if (n_conditions < 2) {
    throw ValidationError("repeated_measures_anova: need at least two conditions");
  }
  for (const auto& row : grid) {
    if (row.size() != n_conditions) {
      throw ValidationError("repeated_measures_anova: grid has missing cells");
    }
  }

  double grand_sum = 0.0;
  for (const auto& row : grid) {
    for (double v : row) grand_sum += v;
  }
  const double n_total = static_cast<double>(n_subjects * n_conditions);
  const double grand_mean = grand_sum / n_total;

  double ss_total = 0.0;
  for (const auto& row : grid) {
    for (double v : row) ss_total += (v - grand_mean) * (v - grand_mean);
  }

  double ss_subjects = 0.0;
  for (const auto& row : grid) {
    double mean = sample_mean(row);
    ss_subjects += static_cast<double>(n_conditions) * (mean - grand_mean) * (mean - grand_mean);
  }

  double ss_conditions = 0.0;
  for (std::size_t c = 0; c < n_conditions; ++c) {
    double sum = 0.0;
    for (const auto& row : grid) sum += row[c];
    double mean = sum / static_cast<double>(n_subjects);
    ss_conditions += static_cast<double>(n_subjects) * (mean - grand_mean) * (mean - grand_mean);
  }

  double ss_error = ss_total - ss_subjects - ss_conditions;
  if (ss_error < 0.0 && ss_error > -1e-12 * std::max(1.0, ss_total)) {
    ss_error = 0.0;  // rounding guard
  }

  AnovaResult r;
  r.df_between = static_cast<long>(n_conditions) - 1;
  r.df_within = (static_cast<long>(n_conditions) - 1) * (static_cast<long>(n_subjects) - 1);
  r.ss_between = ss_conditions;
  r.ss_within = ss_error;
  r.ss_subjects = ss_subjects;
  r.ss_total = ss_total;

  double ms_conditions = ss_conditions / static_cast<double>(r.df_between);
  double ms_error = ss_error / static_cast<double>(r.df_within);
  if (ms_conditions == 0.0) {
    // No condition effect at all (includes the all-identical-per-subject grid).
    r.f_stat = 0.0;
    r.p_value = 1.0;
    r.eta_p_squared = 0.0;
    return r;
  }
  if (ms_error == 0.0) {
    r.f_stat = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.eta_p_squared = 1.0;
    return r;
  }
  r.f_stat = ms_conditions / ms_error;
  r.p_value = f_to_p(r.f_stat, r.df_between, r.df_within);
  r.eta_p_squared = ss_conditions / (ss_conditions + ss_error);
  return r;
}

EffectSize cohens_d(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.size() < 2 || sample_b.size() < 2) {
    throw ValidationError("cohens_d: both samples need at least two values");
  }
  double mean_a = sample_mean(sample_a);
  double mean_b = sample_mean(sample_b);
  double ss_a = 0.0, ss_b = 0.0;
  for (double v : sample_a) ss_a += (v - mean_a) * (v - mean_a);
  for (double v : sample_b) ss_b += (v - mean_b) * (v - mean_b);
  double pooled_var =
      (ss_a + ss_b) / static_cast<double>(sample_a.size() + sample_b.size() - 2);
  if (pooled_var == 0.0) {
    throw ValidationError("cohens_d: degenerate (zero pooled variance)");
  }
  EffectSize e;
  e.pooled_sd = std::sqrt(pooled_var);
  e.cohens_d = (mean_a - mean_b) / e.pooled_sd;
  return e;
}

double pearson_r(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError("pearson_r: length mismatch");
  }
  if (xs.size() < 2) {
    throw ValidationError("pearson_r: need at least two pairs");
  }
  double mean_x = sample_mean(xs);
  double mean_y = sample_mean(ys);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
    syy += (ys[i] - mean_y) * (ys[i] - mean_y);
    sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw ValidationError("pearson_r: degenerate (zero variance)");
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace ghostmark
