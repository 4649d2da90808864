#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace capd {

// Deterministic generator with portable derived distributions. The standard
// <random> distributions are implementation-defined, so uniform indices and
// normals are built here directly on top of mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for (seed, key, tag); used to give every class its own
  // generator so results do not depend on scheduling.
  static Rng for_stream(std::uint64_t seed, std::int64_t key, std::uint64_t tag);

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Unbiased uniform integer on [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  // Standard normal via the Box-Muller transform.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// Stream tags keep independent uses of the same (seed, class) apart.
namespace stream {
inline constexpr std::uint64_t kSplit = 0x5350'4c49'54ULL;
inline constexpr std::uint64_t kShots = 0x5348'4f54'53ULL;
inline constexpr std::uint64_t kInit = 0x494e'4954ULL;
inline constexpr std::uint64_t kShuffle = 0x5348'5546ULL;
inline constexpr std::uint64_t kPairs = 0x5041'4952ULL;
inline constexpr std::uint64_t kSynth = 0x5359'4e54ULL;
inline constexpr std::uint64_t kValidation = 0x5641'4c49ULL;
}  // namespace stream

}  // namespace capd
