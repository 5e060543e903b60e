#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace xgkn::fixtures {

Graph random_graph(std::size_t n, double p, Rng& rng, std::size_t feature_dim, bool binary_features) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
  num::Matrix x(n, feature_dim, 1.0);
  if (binary_features)
    for (double& v : x.values()) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return Graph::from_edges(n, edges, std::move(x));
}

num::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  num::Matrix m(rows, cols);
  for (double& v : m.values()) v = lo + (hi - lo) * rng.uniform();
  return m;
}

std::vector<std::vector<std::size_t>> all_pairs_hops(const Graph& g) {
  constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
  const std::size_t n = g.size();
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, inf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (g.has_edge(i, j)) d[i][j] = 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] != inf && d[k][j] != inf) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

std::vector<std::size_t> hood_oracle(const Graph& g, std::size_t v, std::size_t k, std::size_t max_size) {
  const auto d = all_pairs_hops(g);
  std::vector<std::pair<std::size_t, std::size_t>> cand;  // (hop, id)
  for (std::size_t u = 0; u < g.size(); ++u)
    if (u != v && d[v][u] <= k) cand.emplace_back(d[v][u], u);
  std::sort(cand.begin(), cand.end());
  std::vector<std::size_t> out{v};
  for (const auto& [hop, u] : cand) {
    if (out.size() == max_size) break;
    out.push_back(u);
  }
  return out;
}

namespace {

// Every walk of exactly `length` steps; each entry is (start, end, weight).
struct Walk {
  std::size_t start, end;
  double weight;
};

void extend(const num::Matrix& a, std::size_t start, std::size_t at, std::size_t left, double w,
            std::vector<Walk>& out) {
  if (left == 0) {
    out.push_back({start, at, w});
    return;
  }
  for (std::size_t nxt = 0; nxt < a.rows(); ++nxt)
    if (a(at, nxt) != 0.0) extend(a, start, nxt, left - 1, w * a(at, nxt), out);
}

std::vector<Walk> walks(const num::Matrix& a, std::size_t length, std::optional<std::size_t> from = {}) {
  std::vector<Walk> out;
  for (std::size_t s = 0; s < a.rows(); ++s)
    if (!from || *from == s) extend(a, s, s, length, 1.0, out);
  return out;
}

}  // namespace

double walk_kernel_oracle(const num::Matrix& a1, const num::Matrix& a2, const num::Matrix& S, std::size_t P) {
  double total = 0.0;
  for (std::size_t p = 0; p <= P; ++p) {
    const auto w1 = walks(a1, p);
    const auto w2 = walks(a2, p);
    for (const auto& x : w1)
      for (const auto& y : w2) total += S(x.start, y.start) * S(x.end, y.end) * x.weight * y.weight;
  }
  return total;
}

double anchored_walk_oracle(const num::Matrix& a1, const num::Matrix& a2, const num::Matrix& S,
                            std::size_t anchor, std::size_t P) {
  double total = 0.0;
  for (std::size_t p = 0; p <= P; ++p) {
    const auto w1 = walks(a1, p, anchor);
    const auto w2 = walks(a2, p);
    for (const auto& x : w1)
      for (const auto& y : w2) total += S(anchor, y.start) * S(x.end, y.end) * x.weight * y.weight;
  }
  return total;
}

namespace {

bool same_row(const Graph& a, std::size_t i, const Graph& b, std::size_t j) {
  for (std::size_t c = 0; c < a.feature_dim(); ++c)
    if (a.features()(i, c) != b.features()(j, c)) return false;
  return true;
}

double mapping_cost(const Graph& g1, const Graph& g2, const std::vector<long>& map) {
  constexpr long del = -1;
  double cost = 0.0;
  std::vector<bool> used(g2.size(), false);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    if (map[i] == del) {
      cost += 1.0;
    } else {
      used[map[i]] = true;
      if (!same_row(g1, i, g2, map[i])) cost += 1.0;
    }
  }
  for (std::size_t j = 0; j < g2.size(); ++j)
    if (!used[j]) cost += 1.0;
  // Preimage in g1 (or -1) of each g2 node.
  std::vector<long> inv(g2.size(), del);
  for (std::size_t i = 0; i < g1.size(); ++i)
    if (map[i] != del) inv[map[i]] = static_cast<long>(i);
  for (std::size_t i = 0; i < g1.size(); ++i)
    for (std::size_t k = i + 1; k < g1.size(); ++k) {
      if (!g1.has_edge(i, k)) continue;
      if (map[i] == del || map[k] == del || !g2.has_edge(map[i], map[k])) cost += 1.0;
    }
  for (std::size_t j = 0; j < g2.size(); ++j)
    for (std::size_t l = j + 1; l < g2.size(); ++l) {
      if (!g2.has_edge(j, l)) continue;
      if (inv[j] == del || inv[l] == del || !g1.has_edge(inv[j], inv[l])) cost += 1.0;
    }
  return cost;
}

void search(const Graph& g1, const Graph& g2, std::size_t i, std::vector<long>& map, std::vector<bool>& used,
            double& best) {
  if (i == g1.size()) {
    best = std::min(best, mapping_cost(g1, g2, map));
    return;
  }
  map[i] = -1;
  search(g1, g2, i + 1, map, used, best);
  for (std::size_t j = 0; j < g2.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    map[i] = static_cast<long>(j);
    search(g1, g2, i + 1, map, used, best);
    used[j] = false;
  }
}

}  // namespace

double ged_oracle(const Graph& g1, const Graph& g2) {
  std::vector<long> map(g1.size(), -1);
  std::vector<bool> used(g2.size(), false);
  double best = std::numeric_limits<double>::infinity();
  search(g1, g2, 0, map, used, best);
  return best;
}

std::vector<double> permutation_shapley(const std::function<double(const std::vector<bool>&)>& value,
                                        std::size_t m) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(m, 0.0);
  double count = 0.0;
  do {
    std::vector<bool> in(m, false);
    double prev = value(in);
    for (std::size_t i : order) {
      in[i] = true;
      const double cur = value(in);
      phi[i] += cur - prev;
      prev = cur;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= count;
  return phi;
}

model::XgknModel random_model(const model::ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed, 0x7465'7374);
  model::XgknModel m(cfg, rng);
  auto& bn = m.predictor().bn;
  for (double& v : bn.running_mean.values()) v = rng.uniform() - 0.5;
  for (double& v : bn.running_var.values()) v = 0.5 + rng.uniform();
  for (double& v : bn.gamma.value.values()) v = 0.5 + rng.uniform();
  for (double& v : bn.beta.value.values()) v = rng.uniform() - 0.5;
  return m;
}

data::Dataset separable_toy(std::size_t n_graphs, std::uint64_t seed) {
  Rng rng(seed, 0x746f'79);
  data::Dataset ds;
  ds.name = "toy";
  ds.num_classes = 2;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    const int label = static_cast<int>(g % 2);
    const std::size_t base = 5 + rng.below(3);
    std::vector<Edge> edges;
    for (std::size_t v = 1; v < base; ++v) edges.emplace_back(rng.below(v), v);
    std::size_t n = base;
    if (label == 1) {
      // K4 attached to a random base node.
      for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) edges.emplace_back(n + a, n + b);
      edges.emplace_back(rng.below(base), n);
      n += 4;
    } else {
      // 4-node tail.
      edges.emplace_back(rng.below(base), n);
      for (std::size_t a = 0; a + 1 < 4; ++a) edges.emplace_back(n + a, n + a + 1);
      n += 4;
    }
    ds.graphs.push_back(Graph::from_edges(n, edges, label));
  }
  return ds;
}

bool near_all(std::span<const double> a, std::span<const double> b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(std::abs(a[i] - b[i]) <= tol)) return false;
  return true;
}

}  // namespace xgkn::fixtures
