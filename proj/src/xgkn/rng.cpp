#include "xgkn/rng.hpp"

#include <cmath>
#include <numbers>

#include "xgkn/error.hpp"

namespace xgkn {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream))) {}

Rng Rng::fork(std::uint64_t index) const {
  return Rng(seed_, splitmix64(stream_ + 1) ^ splitmix64(index + 0x5bd1e995ULL));
}

std::uint64_t Rng::next_u64() {
  ++draws_;
  return engine_();
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t bound) {
  require(bound > 0, ErrorCode::kInvalidArgument, "Rng::below: bound must be positive");
  const std::uint64_t b = bound;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % b);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<std::size_t>(x % b);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace xgkn
