#pragma once

#include "ssls/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ssls {

// Stream tags. Every random consumer derives its substream from
// (master seed, tag, indices...) so results never depend on evaluation order.
enum class StreamTag : std::uint64_t {
  kInitialPrior = 1,
  kReference = 2,
  kPrediction = 3,
  kLangevin = 4,
  kTraining = 5,
  kNetworkInit = 6,
  kEnkf = 7,
  kApf = 8,
  kResample = 9,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Counter-based SplitMix64 generator. Cheap to construct, so one can be
/// created per (particle, iteration) without measurable overhead.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key) : state_(key) {}

  template <typename... Path>
  static Stream derive(std::uint64_t seed, StreamTag tag, Path... path) {
    return Stream(derive_key(seed, {static_cast<std::uint64_t>(tag), static_cast<std::uint64_t>(path)...}));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double normal() { return normal_(*this); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  Vector normal_vector(Index dim) {
    Vector v(dim);
    for (Index i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ssls
