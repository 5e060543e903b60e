#include "xgkn/num/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xgkn/error.hpp"

namespace xgkn::num {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorCode::kShape, "Var::scalar: value is not 1x1");
  return v[0];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.parameter = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    require(&in.tape() == this, ErrorCode::kState, "Tape::record: input from another tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Matrix* Tape::grad_sink(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::backward(Var output) {
  require(output.rows() == 1 && output.cols() == 1, ErrorCode::kShape,
          "backward: output must be a scalar (1x1), got " + std::to_string(output.rows()) + "x" +
              std::to_string(output.cols()));
  backward(output, Matrix(1, 1, 1.0), true);
}

void Tape::backward(Var output, const Matrix& seed, bool accumulate) {
  require(&output.tape() == this, ErrorCode::kState, "backward: output from another tape");
  require(seed.same_shape(output.value()), ErrorCode::kShape, "backward: seed shape mismatch");
  const std::size_t root = output.id();
  if (Matrix* g = grad_sink(root)) *g += seed;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || !n.grad.same_shape(n.value)) continue;
    n.backward(*this, i);
  }
  if (accumulate) accumulate_parameter_grads();
}

void Tape::accumulate_parameter_grads() {
  for (Node& n : nodes_) {
    if (n.parameter == nullptr || !n.grad.same_shape(n.value)) continue;
    n.parameter->grad += n.grad;
  }
}

// ---- ops -----------------------------------------------------------------

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.value().same_shape(b.value()), ErrorCode::kShape,
          std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
              std::to_string(b.cols()));
}

// Elementwise unary op with derivative d(out)/d(in) supplied from (in, out).
template <typename F, typename D>
Var unary(Var a, F f, D df) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape().record(std::move(y), {a}, [df](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (Matrix* g = t.grad_sink(in)) {
      const Matrix& x = t.value(in);
      const Matrix& y = t.value(self);
      const Matrix& gy = t.grad(self);
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += gy[i] * df(x[i], y[i]);
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Matrix y = num::matmul(a.value(), b.value());
  return a.tape().record(std::move(y), {a, b}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& gy = t.grad(self);
    if (Matrix* ga = t.grad_sink(in[0])) *ga += num::matmul_bt(gy, t.value(in[1]));
    if (Matrix* gb = t.grad_sink(in[1])) *gb += num::matmul_at(t.value(in[0]), gy);
  });
}

Var matmul_bt(Var a, Var b) {
  Matrix y = num::matmul_bt(a.value(), b.value());
  return a.tape().record(std::move(y), {a, b}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& gy = t.grad(self);
    if (Matrix* ga = t.grad_sink(in[0])) *ga += num::matmul(gy, t.value(in[1]));
    if (Matrix* gb = t.grad_sink(in[1])) *gb += num::matmul_at(gy, t.value(in[0]));
  });
}

Var transpose(Var a) {
  return a.tape().record(a.value().transposed(), {a}, [](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) *g += t.grad(self).transposed();
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Matrix y = a.value();
  y += b.value();
  return a.tape().record(std::move(y), {a, b}, [](Tape& t, std::size_t self) {
    for (std::size_t in : t.inputs(self))
      if (Matrix* g = t.grad_sink(in)) *g += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Matrix y = a.value();
  y -= b.value();
  return a.tape().record(std::move(y), {a, b}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    if (Matrix* g = t.grad_sink(in[0])) *g += t.grad(self);
    if (Matrix* g = t.grad_sink(in[1])) *g -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape().record(std::move(y), {a, b}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& gy = t.grad(self);
    if (Matrix* ga = t.grad_sink(in[0])) {
      const Matrix& bv = t.value(in[1]);
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bv[i];
    }
    if (Matrix* gb = t.grad_sink(in[1])) {
      const Matrix& av = t.value(in[0]);
      for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Matrix y = a.value();
  y *= factor;
  return a.tape().record(std::move(y), {a}, [factor](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) {
      const Matrix& gy = t.grad(self);
      for (std::size_t i = 0; i < gy.size(); ++i) (*g)[i] += factor * gy[i];
    }
  });
}

Var add_scalar(Var a, double offset) {
  Matrix y = a.value();
  for (double& v : y.values()) v += offset;
  return a.tape().record(std::move(y), {a}, [](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) *g += t.grad(self);
  });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::kShape, "add_row: shape mismatch");
  Matrix y = a.value();
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += row.value()(0, c);
  return a.tape().record(std::move(y), {a, row}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& gy = t.grad(self);
    if (Matrix* ga = t.grad_sink(in[0])) *ga += gy;
    if (Matrix* gr = t.grad_sink(in[1]))
      for (std::size_t r = 0; r < gy.rows(); ++r)
        for (std::size_t c = 0; c < gy.cols(); ++c) (*gr)(0, c) += gy(r, c);
  });
}

Var mul_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::kShape, "mul_row: shape mismatch");
  Matrix y = a.value();
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) *= row.value()(0, c);
  return a.tape().record(std::move(y), {a, row}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const Matrix& gy = t.grad(self);
    const Matrix& av = t.value(in[0]);
    const Matrix& rv = t.value(in[1]);
    if (Matrix* ga = t.grad_sink(in[0]))
      for (std::size_t r = 0; r < gy.rows(); ++r)
        for (std::size_t c = 0; c < gy.cols(); ++c) (*ga)(r, c) += gy(r, c) * rv(0, c);
    if (Matrix* gr = t.grad_sink(in[1]))
      for (std::size_t r = 0; r < gy.rows(); ++r)
        for (std::size_t c = 0; c < gy.cols(); ++c) (*gr)(0, c) += gy(r, c) * av(r, c);
  });
}

Var div_scalar(Var a, Var s) {
  require(s.rows() == 1 && s.cols() == 1, ErrorCode::kShape, "div_scalar: divisor must be 1x1");
  const double d = s.value()[0];
  require(d != 0.0, ErrorCode::kNumeric, "div_scalar: division by zero");
  Matrix y = a.value();
  y *= 1.0 / d;
  return a.tape().record(std::move(y), {a, s}, [](Tape& t, std::size_t self) {
    const auto& in = t.inputs(self);
    const double d = t.value(in[1])[0];
    const Matrix& gy = t.grad(self);
    if (Matrix* ga = t.grad_sink(in[0]))
      for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] / d;
    if (Matrix* gs = t.grad_sink(in[1])) {
      const Matrix& y = t.value(self);
      double acc = 0.0;
      for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * y[i];
      (*gs)[0] -= acc / d;
    }
  });
}

Var sum(Var a) {
  return a.tape().record(Matrix(1, 1, a.value().sum()), {a}, [](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) {
      const double gy = t.grad(self)[0];
      for (double& v : g->values()) v += gy;
    }
  });
}

Var col_sum(Var a) {
  const Matrix& x = a.value();
  Matrix y(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) y(0, c) += x(r, c);
  return a.tape().record(std::move(y), {a}, [](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) {
      const Matrix& gy = t.grad(self);
      for (std::size_t r = 0; r < g->rows(); ++r)
        for (std::size_t c = 0; c < g->cols(); ++c) (*g)(r, c) += gy(0, c);
    }
  });
}

Var col_mean(Var a) {
  require(a.rows() > 0, ErrorCode::kShape, "col_mean: empty input");
  return scale(col_sum(a), 1.0 / static_cast<double>(a.rows()));
}

Var log(Var a) {
  const Matrix& x = a.value();
  for (double v : x.values())
    require(v > 0.0, ErrorCode::kNumeric, "log: nonpositive input");
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var xlogx(Var a) {
  for (double v : a.value().values())
    require(v > 0.0, ErrorCode::kNumeric, "xlogx: nonpositive input");
  return unary(
      a, [](double x) { return x * std::log(x); },
      [](double x, double) { return std::log(x) + 1.0; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var rsqrt(Var a) {
  for (double v : a.value().values())
    require(v > 0.0, ErrorCode::kNumeric, "rsqrt: nonpositive input");
  return unary(
      a, [](double x) { return 1.0 / std::sqrt(x); },
      [](double x, double y) { return -0.5 * y / x; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var clamp_min(Var a, double floor) {
  return unary(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var frobenius_norm(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  const double norm = std::sqrt(s);
  return a.tape().record(Matrix(1, 1, norm), {a}, [](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    if (Matrix* g = t.grad_sink(in)) {
      const double norm = t.value(self)[0];
      if (norm == 0.0) return;
      const double gy = t.grad(self)[0];
      const Matrix& x = t.value(in);
      for (std::size_t i = 0; i < x.size(); ++i) (*g)[i] += gy * x[i] / norm;
    }
  });
}

Var row_normalize(Var a, double eps, std::vector<std::size_t>* zero_rows) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  std::vector<double> norms(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row_span(r)) s += v * v;
    const double n = std::sqrt(s);
    if (n < eps) {
      if (zero_rows) zero_rows->push_back(r);
      continue;
    }
    norms[r] = n;
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) / n;
  }
  return a.tape().record(std::move(y), {a}, [norms](Tape& t, std::size_t self) {
    const std::size_t in = t.inputs(self)[0];
    Matrix* g = t.grad_sink(in);
    if (!g) return;
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      if (norms[r] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += gy(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c)
        (*g)(r, c) += (gy(r, c) - dot * y(r, c)) / norms[r];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& x = a.value();
  Matrix y(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < x.rows(), ErrorCode::kShape, "gather_rows: row index out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = x(rows[r], c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record(std::move(y), {a}, [idx](Tape& t, std::size_t self) {
    if (Matrix* g = t.grad_sink(t.inputs(self)[0])) {
      const Matrix& gy = t.grad(self);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < gy.cols(); ++c) (*g)(idx[r], c) += gy(r, c);
    }
  });
}

Var concat_cols(std::span<const Var> columns) {
  require(!columns.empty(), ErrorCode::kShape, "concat_cols: no inputs");
  const std::size_t rows = columns.front().rows();
  std::size_t cols = 0;
  for (const Var& c : columns) {
    require(c.rows() == rows, ErrorCode::kShape, "concat_cols: row count mismatch");
    cols += c.cols();
  }
  Matrix y(rows, cols);
  std::size_t offset = 0;
  for (const Var& c : columns) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < c.cols(); ++k) y(r, offset + k) = c.value()(r, k);
    offset += c.cols();
  }
  return columns.front().tape().record(std::move(y), columns, [](Tape& t, std::size_t self) {
    const Matrix& gy = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t in : t.inputs(self)) {
      const std::size_t k_cols = t.value(in).cols();
      if (Matrix* g = t.grad_sink(in))
        for (std::size_t r = 0; r < gy.rows(); ++r)
          for (std::size_t k = 0; k < k_cols; ++k) (*g)(r, k) += gy(r, offset + k);
      offset += k_cols;
    }
  });
}

Var stack_rows(std::span<const Var> rows) {
  require(!rows.empty(), ErrorCode::kShape, "stack_rows: no inputs");
  const std::size_t cols = rows.front().cols();
  Matrix y(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].rows() == 1 && rows[r].cols() == cols, ErrorCode::kShape,
            "stack_rows: every input must be 1xk with equal k");
    for (std::size_t c = 0; c < cols; ++c) y(r, c) = rows[r].value()(0, c);
  }
  return rows.front().tape().record(std::move(y), rows, [](Tape& t, std::size_t self) {
    const Matrix& gy = t.grad(self);
    const auto& in = t.inputs(self);
    for (std::size_t r = 0; r < in.size(); ++r)
      if (Matrix* g = t.grad_sink(in[r]))
        for (std::size_t c = 0; c < gy.cols(); ++c) (*g)(0, c) += gy(r, c);
  });
}

Var symmetric_sigmoid(Var logits) {
  const Matrix& b = logits.value();
  require(b.rows() == b.cols(), ErrorCode::kShape, "symmetric_sigmoid: logits must be square");
  const std::size_t n = b.rows();
  Matrix y(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double x = 0.5 * (b(i, j) + b(j, i));
      y(i, j) = 1.0 / (1.0 + std::exp(-x));
    }
  return logits.tape().record(std::move(y), {logits}, [](Tape& t, std::size_t self) {
    Matrix* g = t.grad_sink(t.inputs(self)[0]);
    if (!g) return;
    const Matrix& y = t.value(self);
    const Matrix& gy = t.grad(self);
    const std::size_t n = y.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double d = gy(i, j) * y(i, j) * (1.0 - y(i, j)) * 0.5;
        (*g)(i, j) += d;
        (*g)(j, i) += d;
      }
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  require(z.rows() == labels.size(), ErrorCode::kShape, "cross_entropy: label count mismatch");
  require(z.rows() > 0, ErrorCode::kShape, "cross_entropy: empty batch");
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    require(labels[r] >= 0 && static_cast<std::size_t>(labels[r]) < z.cols(), ErrorCode::kShape,
            "cross_entropy: label out of range");
    double mx = z(r, 0);
    for (std::size_t c = 1; c < z.cols(); ++c) mx = std::max(mx, z(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) s += std::exp(z(r, c) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < z.cols(); ++c) probs(r, c) = std::exp(z(r, c) - lse);
    loss += lse - z(r, static_cast<std::size_t>(labels[r]));
  }
  loss /= static_cast<double>(z.rows());
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape().record(
      Matrix(1, 1, loss), {logits}, [probs, lab](Tape& t, std::size_t self) {
        Matrix* g = t.grad_sink(t.inputs(self)[0]);
        if (!g) return;
        const double gy = t.grad(self)[0] / static_cast<double>(probs.rows());
        for (std::size_t r = 0; r < probs.rows(); ++r)
          for (std::size_t c = 0; c < probs.cols(); ++c) {
            const double target = static_cast<std::size_t>(lab[r]) == c ? 1.0 : 0.0;
            (*g)(r, c) += gy * (probs(r, c) - target);
          }
      });
}

}  // namespace xgkn::num
