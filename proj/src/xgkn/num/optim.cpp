#include "xgkn/num/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xgkn/error.hpp"

namespace xgkn::num {

AdamState make_adam_state(std::span<Parameter* const> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.rows(), p->value.cols());
    state.second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
  return state;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  require(params.size() == state.first_moment.size(), ErrorCode::kState,
          "adam_step: parameter count does not match optimizer state");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    require(p.grad.same_shape(p.value), ErrorCode::kState,
            "adam_step: missing gradient for parameter '" + p.name + "'");
    require(state.first_moment[k].same_shape(p.value), ErrorCode::kState,
            "adam_step: optimizer state shape mismatch for '" + p.name + "'");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + c.weight_decay * p.value[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p.value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    p.zero_grad();
  }
}

// Central differences carry roundoff near 1e-11 |f| / eps; gradients below
// this floor are compared in absolute terms.
constexpr double kRelativeFloor = 1e-6;

double finite_difference_check(const ScalarBuilder& f, std::span<Parameter* const> params,
                               double eps) {
  require(eps > 0.0, ErrorCode::kInvalidArgument, "finite_difference_check: eps must be positive");
  auto evaluate = [&]() {
    Tape tape;
    const double v = f(tape).scalar();
    require(std::isfinite(v), ErrorCode::kNumeric, "finite_difference_check: non-finite value");
    return v;
  };

  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    require(std::isfinite(out.scalar()), ErrorCode::kNumeric,
            "finite_difference_check: non-finite value");
    tape.backward(out);
  }
  std::vector<Matrix> analytic;
  for (Parameter* p : params) {
    analytic.push_back(p->grad);
    p->zero_grad();
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = evaluate();
      p.value[i] = saved - eps;
      const double down = evaluate();
      p.value[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double err =
          std::abs(analytic[k][i] - fd) / (std::max(std::abs(fd), std::abs(analytic[k][i])) + kRelativeFloor);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace xgkn::num
