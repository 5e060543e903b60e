#include "xgkn/num/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "xgkn/error.hpp"

namespace xgkn::num {

std::vector<double> softmax(std::span<const double> v) {
  require(!v.empty(), ErrorCode::kInvalidArgument, "softmax: empty input");
  const double mx = *std::max_element(v.begin(), v.end());
  require(std::isfinite(mx), ErrorCode::kNumeric, "softmax: non-finite input");
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_abs(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::kShape, "spearman_abs: length mismatch");
  require(x.size() >= 2, ErrorCode::kShape, "spearman_abs: need at least two observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::min(1.0, std::abs(sxy / std::sqrt(sxx * syy)));
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

namespace {

double sample_var(std::span<const double> v) {
  const double s = sample_std(v);
  return s * s;
}

}  // namespace

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b, double alpha) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::kStatistics,
          "welch_ttest: each sample needs at least two values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = sample_var(a) / na;
  const double vb = sample_var(b) / nb;
  const double diff = mean(a) - mean(b);
  TTestResult r;
  if (va + vb == 0.0) {
    require(diff == 0.0, ErrorCode::kStatistics,
            "welch_ttest: both samples have zero variance but different means");
    // Identical constant samples: no evidence of a difference.
    r.t = 0.0;
    r.df = na + nb - 2.0;
    r.p_value = 1.0;
    r.significant = false;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))), 0.0, 1.0);
  r.significant = r.p_value < alpha;
  return r;
}

}  // namespace xgkn::num
