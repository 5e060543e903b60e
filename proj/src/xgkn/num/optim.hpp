#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xgkn/num/matrix.hpp"
#include "xgkn/num/tape.hpp"

namespace xgkn::num {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;  // classic L2: added to the gradient
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<Parameter* const> params, const AdamConfig& config);

// One Adam update over params (their grads must be populated); zeroes grads.
void adam_step(std::span<Parameter* const> params, AdamState& state);

// Builds a scalar on the given tape from the current parameter values.
using ScalarBuilder = std::function<Var(Tape&)>;

// Max over all coordinates of |g_ad - g_fd| / (max(|g_ad|, |g_fd|) + 1e-6),
// with g_fd from central differences. Restores all parameter values and zeroes their grads.
double finite_difference_check(const ScalarBuilder& f, std::span<Parameter* const> params,
                               double eps = 1e-5);

}  // namespace xgkn::num
