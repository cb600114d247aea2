#include "n2i/rng.hpp"

namespace n2i {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngSeed RngSeed::derive(std::uint64_t sub_stream) const {
  return {seed, splitmix64(stream_id ^ splitmix64(sub_stream + 0x632BE59BD9B4E019ULL))};
}

CounterRng::CounterRng(RngSeed seed, std::uint64_t start)
    : key_(splitmix64(splitmix64(seed.seed) ^ (seed.stream_id * 0xD1B54A32D192ED03ULL + 1))),
      counter_(start) {}

CounterRng::result_type CounterRng::at(std::uint64_t index) const {
  // Two rounds so that adjacent counters of adjacent keys stay decorrelated.
  return splitmix64(splitmix64(key_ + index * 0x9E3779B97F4A7C15ULL) ^ key_);
}

double CounterRng::uniform_at(std::uint64_t index) const {
  return static_cast<double>(at(index) >> 11) * 0x1.0p-53;
}

}  // namespace n2i
