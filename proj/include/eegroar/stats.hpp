#ifndef EEGROAR_STATS_HPP
#define EEGROAR_STATS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace eegroar {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : classes_(classes),
        counts_(static_cast<std::size_t>(classes) * classes, 0) {}

  int classes() const { return classes_; }

  void record(int true_class, int predicted) {
    at(true_class, predicted) += 1;
  }

  std::int64_t& at(int true_class, int predicted) {
    check_index(true_class, predicted);
    return counts_[static_cast<std::size_t>(true_class) * classes_ +
                   predicted];
  }
  std::int64_t at(int true_class, int predicted) const {
    check_index(true_class, predicted);
    return counts_[static_cast<std::size_t>(true_class) * classes_ +
                   predicted];
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts_) t += c;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

 private:
  void check_index(int r, int c) const {
    if (r < 0 || r >= classes_ || c < 0 || c >= classes_)
      throw std::out_of_range("confusion matrix index out of range");
  }

  int classes_ = 0;
  std::vector<std::int64_t> counts_;
};

struct MacroMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
};

/// Accuracy plus macro-averaged precision/recall/F1. Per-class 0/0 ratios
/// count as 0.
MacroMetrics macro_metrics(const ConfusionMatrix& cm);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double df1 = 0.0;  // KS: sample size of a
  double df2 = 0.0;  // KS: sample size of b
  bool degenerate = false;
};

/// Two-sample Kolmogorov-Smirnov test. D is the sup distance between the
/// empirical CDFs; the p-value uses the asymptotic Kolmogorov series at
/// lambda = sqrt(n*m/(n+m)) * D.
TestResult ks_two_sample(const std::vector<double>& a,
                         const std::vector<double>& b);

/// One-way ANOVA F test with p from the regularized incomplete beta.
/// Zero within-group variance with unequal means reports p = 0 with the
/// degenerate flag set.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

struct HolmResult {
  std::vector<double> adjusted;  // same order as the input p-values
  std::vector<bool> rejected;
};

/// Step-down Bonferroni-Holm adjustment at level alpha.
HolmResult holm_correction(const std::vector<double>& p_values, double alpha);

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

}  // namespace eegroar

#endif  // EEGROAR_STATS_HPP
