#include "xgkn/data/dataset.hpp"

#include <cstring>

#include "xgkn/error.hpp"

namespace xgkn::data {

const char* feature_policy_name(FeaturePolicy policy) {
  switch (policy) {
    case FeaturePolicy::kConstant: return "constant";
    case FeaturePolicy::kOneHotLabel: return "one-hot-label";
    case FeaturePolicy::kDegree: return "degree";
    case FeaturePolicy::kOneHotDegree: return "one-hot-degree";
  }
  return "constant";
}

FeaturePolicy parse_feature_policy(const std::string& name) {
  if (name == "constant" || name == "none") return FeaturePolicy::kConstant;
  if (name == "one-hot-label") return FeaturePolicy::kOneHotLabel;
  if (name == "degree") return FeaturePolicy::kDegree;
  if (name == "one-hot-degree") return FeaturePolicy::kOneHotDegree;
  fail(ErrorCode::kInvalidArgument, "unknown feature policy '" + name + "'");
}

bool Dataset::has_instance_masks() const {
  for (const auto& m : gt_instance_masks)
    if (m.has_value()) return true;
  return false;
}

int Dataset::label(std::size_t i) const {
  auto l = graphs.at(i).label();
  require(l.has_value(), ErrorCode::kFormat, "dataset graph " + std::to_string(i) + " has no label");
  return *l;
}

void Dataset::validate() const {
  require(!graphs.empty(), ErrorCode::kFormat, "dataset '" + name + "' has no graphs");
  const std::size_t d = feature_dim();
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const int l = label(i);
    require(l >= 0 && l < num_classes, ErrorCode::kFormat,
            "graph " + std::to_string(i) + " label out of range");
    require(graphs[i].feature_dim() == d, ErrorCode::kFeatureDim,
            "graph " + std::to_string(i) + " feature dimension differs");
  }
  require(gt_instance_masks.empty() || gt_instance_masks.size() == graphs.size(),
          ErrorCode::kFormat, "mask count does not match graph count");
  for (std::size_t i = 0; i < gt_instance_masks.size(); ++i) {
    if (!gt_instance_masks[i]) continue;
    for (NodeId id : gt_instance_masks[i]->ids())
      require(graphs[i].index_of(id).has_value(), ErrorCode::kFormat,
              "mask of graph " + std::to_string(i) + " references unknown node " +
                  std::to_string(id));
  }
}

num::Matrix Dataset::feature_pool(const std::vector<std::size_t>& graph_ids) const {
  std::vector<std::size_t> ids = graph_ids;
  if (ids.empty())
    for (std::size_t i = 0; i < graphs.size(); ++i) ids.push_back(i);
  std::size_t rows = 0;
  for (std::size_t i : ids) rows += graphs.at(i).size();
  num::Matrix pool(rows, feature_dim());
  std::size_t r = 0;
  for (std::size_t i : ids) {
    const auto& f = graphs[i].features();
    for (std::size_t v = 0; v < f.rows(); ++v, ++r)
      for (std::size_t c = 0; c < f.cols(); ++c) pool(r, c) = f(v, c);
  }
  return pool;
}

double Dataset::average_density() const {
  if (graphs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& g : graphs) s += g.density();
  return s / static_cast<double>(graphs.size());
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void matrix(const num::Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.values()) f64(v);
  }
};

}  // namespace

std::uint64_t Dataset::content_hash() const {
  Fnv1a h;
  h.bytes(name.data(), name.size());
  h.u64(static_cast<std::uint64_t>(num_classes));
  h.u64(graphs.size());
  for (const auto& g : graphs) {
    h.matrix(g.adjacency());
    h.matrix(g.features());
    h.u64(static_cast<std::uint64_t>(g.label().value_or(-1)));
  }
  h.u64(gt_instance_masks.size());
  for (const auto& m : gt_instance_masks) {
    h.u64(m ? m->size() + 1 : 0);
    if (m)
      for (NodeId id : m->ids()) h.u64(id);
  }
  h.u64(gt_motifs.size());
  for (const auto& g : gt_motifs) {
    h.matrix(g.adjacency());
    h.matrix(g.features());
  }
  return h.h;
}

}  // namespace xgkn::data
