#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace choicecheck {

// Philox4x32-10 counter-based generator (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). Every random number in the library is a pure
// function of (key, counter), so results never depend on the order in which
// draws or observations are processed.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::string_view kName = "philox4x32-10";
  static constexpr int kVersion = 1;

  static Counter generate(Counter ctr, Key key) noexcept;
};

// Stream tags keep the counter spaces of independent consumers disjoint.
enum class Stream : std::uint32_t {
  kParameterDraws = 1,
  kOutcomes = 2,
  kFoldShuffle = 3,
  kTest = 0xFFFF,
};

// A keyed view of Philox: uniform/normal variates addressed by
// (stream, a, b). `a` is typically a draw index and `b` an observation or
// coordinate index.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::array<std::uint32_t, 4> bits(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept;

  // Uniform on [0, 1) with 53 random bits.
  double uniform(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept;

  // Standard normal via Box-Muller on the two 53-bit uniforms of one block.
  double normal(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept;

 private:
  std::uint64_t seed_;
  Philox4x32::Key key_;
};

// Human-readable generator identity for output metadata.
std::string_view rng_description() noexcept;

}  // namespace choicecheck
