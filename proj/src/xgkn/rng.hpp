#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace xgkn {

// Seeded pseudo-random stream. Every draw is derived from raw 64-bit engine
// output with portable conversions, so a seed reproduces the same values on
// any platform (std:: distributions are implementation-defined).
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/splitmix64";

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  // Independent stream for worker `index`, derived from this stream's seed.
  Rng fork(std::uint64_t index) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t draws() const noexcept { return draws_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, bound); bound > 0.
  std::size_t below(std::size_t bound);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t draws_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace xgkn
