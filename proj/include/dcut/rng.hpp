#pragma once

#include <cstdint>
#include <limits>

namespace dcut {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// SplitMix64 as a UniformRandomBitGenerator. Output i is mix64 of the key
/// advanced i times by the golden-ratio increment, so a stream is a pure
/// function of its key and costs nothing to create.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(std::uint64_t key = 0) noexcept : state_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t z = mix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return z;
  }

  void discard(std::uint64_t n) noexcept { state_ += n * 0x9e3779b97f4a7c15ULL; }

  friend bool operator==(const Engine&, const Engine&) = default;

 private:
  std::uint64_t state_;
};

/// Counter-based stream derivation: the stream for (seed, index, lane) depends
/// on nothing else, so replicate order and thread count cannot change results.
inline Engine make_stream(std::uint64_t seed, std::uint64_t index, std::uint64_t lane = 0) {
  return Engine(mix64(seed ^ mix64(index ^ mix64(lane + 0x632be59bd9b4e019ULL))));
}

}  // namespace dcut
