#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace qmh {

/// Philox4x32-10 block function. Exposed for known-answer testing.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (seed, chain index, purpose tag).
///
/// Streams with different keys are statistically independent, so adding a
/// diagnostic stream never perturbs the draws of an existing chain. Satisfies
/// UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t chain = 0,
                        std::string_view purpose = {});

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double normal();

  /// Number of 64-bit words drawn so far.
  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::array<std::uint32_t, 2> key_{};
  std::uint32_t stream_hi_ = 0;
  std::uint32_t stream_lo_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  std::uint64_t draws_ = 0;
};

/// 64-bit FNV-1a, used for purpose tags and config hashing helpers.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace qmh
