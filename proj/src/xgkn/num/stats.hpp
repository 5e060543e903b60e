#pragma once

#include <span>
#include <vector>

namespace xgkn::num {

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> v);

// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

// |Spearman rho| via Pearson correlation of average ranks; 0 when either input
// is constant.
double spearman_abs(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_std(std::span<const double> v);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;       // Welch–Satterthwaite
  double p_value = 1.0;  // two-sided
  bool significant = false;
};

// Welch's unequal-variance two-sample t-test.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha = 0.05);

}  // namespace xgkn::num
