#include "eegroar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eegroar {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes_ != classes_)
    throw std::invalid_argument("confusion matrix class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

MacroMetrics macro_metrics(const ConfusionMatrix& cm) {
  const int k = cm.classes();
  const double total = static_cast<double>(cm.total());
  if (k <= 0 || total <= 0)
    throw std::invalid_argument("macro_metrics on an empty confusion matrix");

  double trace = 0, precision = 0, recall = 0, f1 = 0;
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    trace += tp;
    double row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += static_cast<double>(cm.at(c, j));
      col += static_cast<double>(cm.at(j, c));
    }
    const double p = col > 0 ? tp / col : 0.0;
    const double r = row > 0 ? tp / row : 0.0;
    precision += p;
    recall += r;
    f1 += (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return {trace / total, precision / k, recall / k, f1 / k};
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term =
        (k % 2 == 1 ? 1.0 : -1.0) *
        std::exp(-2.0 * static_cast<double>(k) * k * lambda * lambda);
    sum += term;
    if (k >= 100 && std::abs(term) < 1e-12) break;
  }
  const double q = 2.0 * sum;
  return std::clamp(q, 0.0, 1.0);
}

TestResult ks_two_sample(const std::vector<double>& a,
                         const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("ks_two_sample needs at least 2 values per sample");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n = static_cast<double>(sa.size());
  const double m = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n -
                             static_cast<double>(j) / m));
  }
  TestResult r;
  r.statistic = d;
  r.df1 = n;
  r.df2 = m;
  const double lambda = std::sqrt(n * m / (n + m)) * d;
  r.p_value = kolmogorov_survival(lambda);
  return r;
}

namespace {

double log_gamma(double x) { return std::lgamma(x); }

/// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2)
    throw std::invalid_argument("anova_oneway needs at least 2 groups");
  std::size_t total_n = 0;
  bool all_identical = true;
  for (const auto& g : groups) {
    if (g.size() < 2)
      throw std::invalid_argument("anova_oneway needs >= 2 values per group");
    total_n += g.size();
    for (double v : g)
      if (v != groups.front().front()) all_identical = false;
  }
  if (all_identical)
    throw std::invalid_argument(
        "anova_oneway: all values identical, F undefined");
  const double n = static_cast<double>(total_n);
  const double k = static_cast<double>(groups.size());

  double grand = 0.0;
  for (const auto& g : groups)
    grand = std::accumulate(g.begin(), g.end(), grand);
  grand /= n;

  double ss_between = 0.0, ss_within = 0.0;
  for (const auto& g : groups) {
    const double mean =
        std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ss_within += (v - mean) * (v - mean);
  }

  TestResult r;
  r.df1 = k - 1.0;
  r.df2 = n - k;
  if (ss_within <= 0.0) {
    // constant groups with distinct means
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.degenerate = true;
    return r;
  }
  const double ms_between = ss_between / r.df1;
  const double ms_within = ss_within / r.df2;
  r.statistic = ms_between / ms_within;
  const double x = r.df2 / (r.df2 + r.df1 * r.statistic);
  r.p_value = incomplete_beta(r.df2 / 2.0, r.df1 / 2.0, x);
  return r;
}

HolmResult holm_correction(const std::vector<double>& p_values, double alpha) {
  for (double p : p_values)
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("holm_correction: p-value outside [0,1]");
  const std::size_t m = p_values.size();
  HolmResult r;
  r.adjusted.assign(m, 0.0);
  r.rejected.assign(m, false);
  if (m == 0) return r;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return p_values[x] < p_values[y];
  });

  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t idx = order[rank];
    const double scaled =
        std::min(1.0, static_cast<double>(m - rank) * p_values[idx]);
    running = std::max(running, scaled);
    r.adjusted[idx] = running;
    r.rejected[idx] = running <= alpha;
  }
  return r;
}

}  // namespace eegroar
