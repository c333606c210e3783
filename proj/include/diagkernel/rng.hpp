#pragma once
// Counter-based random numbers. A stream is a 64-bit key; the i-th draw of a
// stream is a pure function of (key, i), so work cells can be generated in any
// order and on any thread without changing their values.
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace diagkernel {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds any number of words into one stream key.
constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto w : words) h = mix64(h ^ mix64(w));
  return h;
}

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key, std::uint64_t start = 0) noexcept
      : key_(key), ctr_(start) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(ctr_++)); }

  // [0, 1) with 53 random bits.
  constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Box-Muller; each call consumes two counters so the stream stays positional.
  double normal() noexcept {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double log_uniform(double lo, double hi) noexcept {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  constexpr std::uint64_t counter() const noexcept { return ctr_; }
  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_;
};

}  // namespace diagkernel
