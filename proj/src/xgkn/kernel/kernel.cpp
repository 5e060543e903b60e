#include "xgkn/kernel/kernel.hpp"

#include <cmath>

#include "xgkn/error.hpp"

namespace xgkn::kernel {

namespace {

num::Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  num::Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.normal();
  return m;
}

num::Matrix normalize_rows(num::Matrix m, std::vector<std::size_t>* zero_rows) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row_span(r);
    double s = 0.0;
    for (double x : row) s += x * x;
    const double norm = std::sqrt(s);
    if (norm < 1e-12) {
      for (double& x : row) x = 0.0;
      if (zero_rows) zero_rows->push_back(r);
      continue;
    }
    for (double& x : row) x /= norm;
  }
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// K for one hood, given the hood's rows of the similarity matrix.
struct HoodEval {
  std::vector<std::vector<double>> q;  // q_p = A_h^p σ
  std::vector<std::vector<double>> u;  // u_p = S_vᵀ t_p
  double value = 0.0;
};

HoodEval eval_hood(const num::Matrix& s_full, const num::Matrix& a_h, const AnchoredHood& hood) {
  const std::size_t size = s_full.cols();
  const std::size_t P = hood.walks.rows() - 1;
  const std::size_t nv = hood.positions.size();
  HoodEval e;
  e.q.resize(P + 1);
  e.u.resize(P + 1, std::vector<double>(size, 0.0));
  const auto sigma = s_full.row_span(hood.positions[0]);
  e.q[0].assign(sigma.begin(), sigma.end());
  for (std::size_t p = 0; p < P; ++p) e.q[p + 1] = num::matvec(a_h, e.q[p]);
  for (std::size_t p = 0; p <= P; ++p) {
    for (std::size_t r = 0; r < nv; ++r) {
      const double t = hood.walks(p, r);
      if (t == 0.0) continue;
      const auto srow = s_full.row_span(hood.positions[r]);
      for (std::size_t j = 0; j < size; ++j) e.u[p][j] += t * srow[j];
    }
    e.value += dot(e.u[p], e.q[p]);
  }
  return e;
}

}  // namespace

Encoder Encoder::random(std::size_t d, std::size_t d_embed, Rng& rng) {
  require(d >= 1 && d_embed >= 1, ErrorCode::kInvalidArgument, "Encoder: dimensions must be positive");
  return Encoder{num::Parameter("encoder.weight", random_normal(d, d_embed, rng))};
}

num::Matrix Encoder::embed(const num::Matrix& features, std::vector<std::size_t>* zero_rows) const {
  require(features.cols() == input_dim(), ErrorCode::kFeatureDim,
          "encoder expects " + std::to_string(input_dim()) + " features, got " +
              std::to_string(features.cols()));
  return normalize_rows(num::matmul(features, weight.value), zero_rows);
}

num::Var Encoder::embed(num::Tape& tape, const num::Matrix& features) {
  require(features.cols() == input_dim(), ErrorCode::kFeatureDim,
          "encoder expects " + std::to_string(input_dim()) + " features, got " +
              std::to_string(features.cols()));
  return num::row_normalize(num::matmul(tape.constant(features), tape.parameter(weight)));
}

GraphFilter GraphFilter::random(std::size_t size, std::size_t d_embed, Rng& rng) {
  require(size >= 1 && d_embed >= 1, ErrorCode::kInvalidArgument, "GraphFilter: dimensions must be positive");
  GraphFilter f;
  f.logits = num::Parameter("filter.logits", random_normal(size, size, rng));
  f.features = num::Parameter("filter.features", random_normal(size, d_embed, rng));
  return f;
}

num::Matrix GraphFilter::adjacency() const {
  const num::Matrix& b = logits.value;
  const std::size_t n = b.rows();
  num::Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) a(i, j) = 1.0 / (1.0 + std::exp(-0.5 * (b(i, j) + b(j, i))));
  return a;
}

Graph GraphFilter::to_graph() const { return Graph(adjacency(), features.value); }

num::Matrix node_pair_similarity(const Graph& gv, const GraphFilter& filter, const Encoder& encoder,
                                 std::vector<std::size_t>* zero_rows) {
  const num::Matrix e = encoder.embed(gv.features(), zero_rows);
  const num::Matrix f = normalize_rows(filter.features.value, nullptr);
  require(e.cols() == f.cols(), ErrorCode::kFeatureDim, "filter and encoder embedding widths differ");
  return num::matmul_bt(e, f);
}

double rw_kernel(const Graph& g1, const Graph& g2, std::size_t P, const num::Matrix& S) {
  require(S.rows() == g1.size() && S.cols() == g2.size(), ErrorCode::kShape,
          "rw_kernel: similarity must be |g1| x |g2|");
  const num::Matrix a2t = g2.adjacency().transposed();
  num::Matrix x = S;
  double k = 0.0;
  for (std::size_t p = 0;; ++p) {
    k += dot(S.values(), x.values());
    if (p == P) break;
    x = num::matmul(num::matmul(g1.adjacency(), x), a2t);
  }
  return k;
}

num::Matrix anchor_walks(const num::Matrix& adjacency, std::size_t anchor, std::size_t P) {
  const std::size_t n = adjacency.rows();
  require(anchor < n, ErrorCode::kAnchor, "anchor_walks: anchor outside graph");
  num::Matrix t(P + 1, n);
  std::vector<double> cur(n, 0.0);
  cur[anchor] = 1.0;
  for (std::size_t p = 0; p <= P; ++p) {
    for (std::size_t i = 0; i < n; ++i) t(p, i) = cur[i];
    if (p < P) cur = num::matvec(adjacency, cur);
  }
  return t;
}

double anchored_rw_kernel(const num::Matrix& a_g, const num::Matrix& a_h, const num::Matrix& S,
                          std::size_t anchor, std::size_t P) {
  require(S.rows() == a_g.rows() && S.cols() == a_h.rows(), ErrorCode::kShape,
          "anchored_rw_kernel: similarity must be |g| x |h|");
  AnchoredHood hood;
  hood.walks = anchor_walks(a_g, anchor, P);
  hood.positions.resize(a_g.rows());
  // Put the anchor first so row 0 of the hood is the anchor's similarity row.
  hood.positions[0] = anchor;
  num::Matrix walks(P + 1, a_g.rows());
  for (std::size_t i = 0, r = 1; i < a_g.rows(); ++i) {
    if (i == anchor) continue;
    hood.positions[r++] = i;
  }
  for (std::size_t p = 0; p <= P; ++p)
    for (std::size_t r = 0; r < a_g.rows(); ++r) walks(p, r) = hood.walks(p, hood.positions[r]);
  hood.walks = std::move(walks);
  return eval_hood(S, a_h, hood).value;
}

double anchored_rw_kernel(const Graph& gv, const GraphFilter& filter, const Encoder& encoder) {
  require(gv.anchor().has_value(), ErrorCode::kAnchor, "anchored_rw_kernel: graph carries no anchor");
  const num::Matrix S = node_pair_similarity(gv, filter, encoder);
  return anchored_rw_kernel(gv.adjacency(), filter.adjacency(), S, *gv.anchor(), filter.size());
}

std::vector<AnchoredHood> anchored_hoods(const Graph& g, std::size_t k, std::size_t max_size,
                                         std::size_t P) {
  std::vector<AnchoredHood> hoods;
  hoods.reserve(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) {
    const Graph h = k_hop_neighborhood(g, g.node_ids()[v], k, max_size);
    AnchoredHood a;
    for (NodeId id : h.node_ids()) a.positions.push_back(*g.index_of(id));
    a.walks = anchor_walks(h.adjacency(), 0, P);
    hoods.push_back(std::move(a));
  }
  return hoods;
}

num::Var anchored_response(num::Var s_full, num::Var a_h, const std::vector<AnchoredHood>& hoods) {
  require(a_h.rows() == s_full.cols() && a_h.cols() == s_full.cols(), ErrorCode::kShape,
          "anchored_response: filter adjacency must match similarity width");
  num::Matrix out(hoods.size(), 1);
  for (std::size_t v = 0; v < hoods.size(); ++v) out(v, 0) = eval_hood(s_full.value(), a_h.value(), hoods[v]).value;
  // Hood data is captured by pointer; the hoods must outlive backward().
  const auto* hp = &hoods;
  return s_full.tape().record(std::move(out), {s_full, a_h}, [hp](num::Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const num::Matrix& S = t.value(in[0]);
    const num::Matrix& A = t.value(in[1]);
    const num::Matrix& gy = t.grad(self);
    num::Matrix* gs = t.grad_sink(in[0]);
    num::Matrix* ga = t.grad_sink(in[1]);
    const std::size_t size = S.cols();
    const num::Matrix at = A.transposed();
    for (std::size_t v = 0; v < hp->size(); ++v) {
      const double gk = gy(v, 0);
      if (gk == 0.0) continue;
      const AnchoredHood& hood = (*hp)[v];
      const HoodEval e = eval_hood(S, A, hood);
      const std::size_t P = hood.walks.rows() - 1;
      if (gs) {
        for (std::size_t p = 0; p <= P; ++p)
          for (std::size_t r = 0; r < hood.positions.size(); ++r) {
            const double tw = gk * hood.walks(p, r);
            if (tw == 0.0) continue;
            auto row = gs->row_span(hood.positions[r]);
            for (std::size_t j = 0; j < size; ++j) row[j] += tw * e.q[p][j];
          }
      }
      // Reverse sweep over q_{p+1} = A q_p with adjoint gbar_p.
      std::vector<double> gbar = e.u[P];
      for (std::size_t p = P; p-- > 0;) {
        if (ga)
          for (std::size_t i = 0; i < size; ++i)
            for (std::size_t j = 0; j < size; ++j) (*ga)(i, j) += gk * gbar[i] * e.q[p][j];
        std::vector<double> next = num::matvec(at, gbar);
        for (std::size_t j = 0; j < size; ++j) next[j] += e.u[p][j];
        gbar = std::move(next);
      }
      if (gs) {
        auto row = gs->row_span(hood.positions[0]);
        for (std::size_t j = 0; j < size; ++j) row[j] += gk * gbar[j];
      }
    }
  });
}

KernelResponse f_sim(const Graph& g, const std::vector<GraphFilter>& filters, const Encoder& encoder,
                     std::size_t k, std::size_t max_size) {
  require(!filters.empty(), ErrorCode::kInvalidArgument, "f_sim: no filters");
  require(k >= 1 && max_size >= 1, ErrorCode::kInvalidArgument, "f_sim: k and max_size must be >= 1");
  const num::Matrix e = encoder.embed(g.features());
  KernelResponse out{num::Matrix(g.size(), filters.size())};
  std::vector<AnchoredHood> hoods;
  std::size_t hood_p = ~std::size_t{0};
  for (std::size_t i = 0; i < filters.size(); ++i) {
    const GraphFilter& f = filters[i];
    if (f.size() != hood_p) {
      hoods = anchored_hoods(g, k, max_size, f.size());
      hood_p = f.size();
    }
    const num::Matrix S = num::matmul_bt(e, normalize_rows(f.features.value, nullptr));
    const num::Matrix A = f.adjacency();
    for (std::size_t v = 0; v < g.size(); ++v) out.R(v, i) = eval_hood(S, A, hoods[v]).value;
  }
  return out;
}

}  // namespace xgkn::kernel
