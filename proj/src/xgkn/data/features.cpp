#include <algorithm>
#include <cmath>
#include <map>

#include "xgkn/data/dataset.hpp"
#include "xgkn/error.hpp"

namespace xgkn::data {

std::size_t max_degree(const Dataset& ds, const std::vector<std::size_t>& graph_ids) {
  std::size_t best = 0;
  auto visit = [&](const Graph& g) {
    for (std::size_t v = 0; v < g.size(); ++v) best = std::max(best, g.degree(v));
  };
  if (graph_ids.empty())
    for (const auto& g : ds.graphs) visit(g);
  else
    for (std::size_t i : graph_ids) visit(ds.graphs.at(i));
  return best;
}

Dataset apply_feature_policy(Dataset ds, FeaturePolicy policy, std::size_t degree_cap) {
  if (policy == FeaturePolicy::kOneHotDegree && degree_cap == 0) degree_cap = max_degree(ds);
  if (policy == FeaturePolicy::kOneHotLabel) {
    ds.feature_policy = policy;
    return ds;
  }
  for (auto& g : ds.graphs) {
    const std::size_t n = g.size();
    num::Matrix f;
    switch (policy) {
      case FeaturePolicy::kConstant:
        f = num::Matrix(n, 1, 1.0);
        break;
      case FeaturePolicy::kDegree:
        f = num::Matrix(n, 1);
        for (std::size_t v = 0; v < n; ++v) f(v, 0) = static_cast<double>(g.degree(v));
        break;
      case FeaturePolicy::kOneHotDegree:
        f = num::Matrix(n, degree_cap + 1);
        for (std::size_t v = 0; v < n; ++v) f(v, std::min(g.degree(v), degree_cap)) = 1.0;
        break;
      case FeaturePolicy::kOneHotLabel:
        break;
    }
    g = g.with_features(std::move(f));
  }
  // Motif features follow the same policy so GED substitutions compare alike.
  for (auto& g : ds.gt_motifs) {
    if (policy == FeaturePolicy::kConstant) g = g.with_features(num::Matrix(g.size(), 1, 1.0));
  }
  ds.feature_policy = policy;
  return ds;
}

std::vector<Split> stratified_split(const Dataset& ds, double test_fraction, std::size_t n_repeats,
                                    std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::kInvalidArgument,
          "stratified_split: test_fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.label(i)].push_back(i);
  for (const auto& [c, members] : by_class)
    require(members.size() >= 2, ErrorCode::kSplit,
            "stratified_split: class " + std::to_string(c) + " has fewer than 2 members");

  const Rng master(seed);
  std::vector<Split> splits;
  for (std::size_t r = 0; r < n_repeats; ++r) {
    Rng rng = master.fork(r);
    Split s;
    s.fold = r;
    s.seed = seed;
    for (const auto& [c, members] : by_class) {
      auto shuffled = members;
      rng.shuffle(shuffled);
      const auto n_c = static_cast<double>(members.size());
      const auto n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(test_fraction * n_c)), 1,
                                                  members.size() - 1);
      s.test.insert(s.test.end(), shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
      s.train.insert(s.train.end(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace xgkn::data
