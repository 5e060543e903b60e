#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xgkn/num/matrix.hpp"

namespace xgkn::num {

// Trainable tensor living outside any tape. Tapes read `value` and, after
// backward, add into `grad`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value)
      : name(std::move(name)), value(std::move(value)), grad(this->value.rows(), this->value.cols()) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Matrix value;
  Matrix grad;
};

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode gradient tape over small dense matrices. One tape records one
// forward pass; it is single-owner and not thread-safe. Distinct tapes may run
// concurrently as long as they only read shared Parameters during the forward
// pass and accumulate_parameter_grads() calls are serialized.
class Tape {
 public:
  // Propagates gradient from the node's grad into its inputs' grads.
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  // Custom op: records `value` computed from `inputs`; `backward` is skipped
  // when no input requires a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of `id`, or nullptr when that node needs no gradient.
  Matrix* grad_sink(std::size_t id);
  std::size_t size() const noexcept { return nodes_.size(); }

  // Seeds d(output)/d(output) = 1 for a 1×1 output, runs the reverse sweep and
  // adds leaf gradients into their Parameters.
  void backward(Var output);
  // Same with an explicit upstream gradient; optionally leaves Parameters
  // untouched so the caller can merge leaf grads later in a fixed order.
  void backward(Var output, const Matrix& seed, bool accumulate = true);
  void accumulate_parameter_grads();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
};

// ---- op vocabulary -------------------------------------------------------

Var matmul(Var a, Var b);
Var matmul_bt(Var a, Var b);  // a · bᵀ
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var add_row(Var a, Var row);  // a (n×k) + row (1×k) broadcast
Var mul_row(Var a, Var row);  // a (n×k) ∘ row (1×k) broadcast
Var div_scalar(Var a, Var s);  // a / s, s is 1×1
Var sum(Var a);                // 1×1
Var col_sum(Var a);            // 1×k
Var col_mean(Var a);           // 1×k
Var log(Var a);
Var xlogx(Var a);              // a ∘ log a
Var square(Var a);
Var rsqrt(Var a);              // a^{-1/2}
Var sigmoid(Var a);
Var relu(Var a);
Var clamp_min(Var a, double floor);
Var frobenius_norm(Var a);     // 1×1
// L2-normalizes each row. Rows with norm below `eps` become zero rows with a
// zero gradient; their indices are appended to `zero_rows` when given.
Var row_normalize(Var a, double eps = 1e-12, std::vector<std::size_t>* zero_rows = nullptr);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_cols(std::span<const Var> columns);  // each n×1 (or n×k_i)
Var stack_rows(std::span<const Var> rows);      // each 1×k
// sigmoid((B + Bᵀ)/2) with the diagonal forced to zero.
Var symmetric_sigmoid(Var logits);
// Mean negative log-likelihood of softmax(logits) rows against labels.
Var cross_entropy(Var logits, std::span<const int> labels);

}  // namespace xgkn::num
