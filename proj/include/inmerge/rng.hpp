#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace inmerge {

// Purposes for independent random streams derived from one run seed.
enum class StreamPurpose : std::uint64_t {
  kInit = 1,
  kShuffle = 2,
  kAugment = 3,
  kMerge = 4,
  kSynth = 5,
  kLabelNoise = 6,
};

std::uint64_t splitmix64(std::uint64_t x);

// stream seed = H(H(H(seed) ^ purpose) ^ index); fixed across platforms.
std::uint64_t derive_seed(std::uint64_t seed, StreamPurpose purpose,
                          std::uint64_t index = 0);

// mt19937_64 engine with platform-independent sampling helpers. The
// standard distributions are implementation-defined, so draws are built
// from raw engine output here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // True with probability p. p <= 0 never fires, p >= 1 always fires;
  // exactly one engine draw either way.
  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [0, n), n >= 1, by rejection.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal by Box-Muller; consumes two draws.
  double normal();

  // Engine state as text; restores exactly via restore().
  std::string serialize() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace inmerge
