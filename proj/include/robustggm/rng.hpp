#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace robustggm {

inline constexpr std::uint64_t splitmix_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the k-th output is mix(key + (k+1) * golden).
/// Any stream can be derived from (seed, ids...) without shared state, so
/// simulations are reproducible regardless of evaluation order.
class Rng {
 public:
  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  explicit Rng(std::uint64_t seed = 0) noexcept : key_(splitmix_mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  /// Independent stream for (this key, ids...).
  Rng derive(std::initializer_list<std::uint64_t> ids) const noexcept {
    std::uint64_t k = key_;
    for (std::uint64_t id : ids) k = splitmix_mix(k ^ splitmix_mix(id + 0x9e3779b97f4a7c15ULL));
    Rng out;
    out.key_ = k;
    return out;
  }

  result_type operator()() noexcept {
    ++counter_;
    return splitmix_mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t counter() const noexcept { return counter_; }

  /// Uniform on (0, 1): never returns 0 or 1.
  double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  /// Gamma with the given shape and *rate*.
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(*this);
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
    return d(*this);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace robustggm
