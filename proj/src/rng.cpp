#include "choicecheck/rng.hpp"

#include <cmath>
#include <numbers>

namespace choicecheck {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t v = (static_cast<std::uint64_t>(hi) << 32 | lo) >> 11;
  return static_cast<double>(v) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMulA, ctr[0], lo0, hi0);
    mulhilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t seed) noexcept
    : seed_(seed),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

std::array<std::uint32_t, 4> CounterRng::bits(Stream stream, std::uint64_t a,
                                              std::uint32_t b) const noexcept {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b,
                                static_cast<std::uint32_t>(stream)};
  return Philox4x32::generate(ctr, key_);
}

double CounterRng::uniform(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
  const auto w = bits(stream, a, b);
  return to_unit(w[0], w[1]);
}

double CounterRng::normal(Stream stream, std::uint64_t a, std::uint32_t b) const noexcept {
  const auto w = bits(stream, a, b);
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - to_unit(w[0], w[1]);
  const double u2 = to_unit(w[2], w[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string_view rng_description() noexcept { return "philox4x32-10/v1 (box-muller normals, 53-bit uniforms)"; }

}  // namespace choicecheck
