#pragma once

#include <cstdint>
#include <limits>

namespace n2i {

struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Child seed for a sub-stream, e.g. one per projection angle.
  RngSeed derive(std::uint64_t sub_stream) const;
  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based generator: draw i of stream (seed, stream_id) is a pure function
/// of the triple, so results do not depend on evaluation order.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(RngSeed seed, std::uint64_t start = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return at(counter_++); }

  /// Random access without advancing the counter.
  result_type at(std::uint64_t index) const;
  /// Uniform double in [0, 1) from draw `index`.
  double uniform_at(std::uint64_t index) const;

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace n2i
