#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure
// function of (seed, stream, counter), so independent streams can be
// evaluated in any order, or in parallel, with identical results. The
// distributions below are implemented here rather than taken from <random>
// because the standard distributions are implementation-defined.

#include <array>
#include <cstdint>

namespace flucsr {

class CounterRng {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  /// One Philox4x32-10 block cipher evaluation.
  static Block philox(Block counter, Key key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Exponential with the given mean.
  double exponential(double mean);
  /// Standard normal (Box-Muller, no cached second variate).
  double normal();
  /// Poisson with the given mean (Knuth below 10, PTRS otherwise).
  std::uint64_t poisson(double mean);

 private:
  void refill();

  Key key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  Block buffer_{};
  int used_ = 4;
};

enum class StreamKind : std::uint64_t { EmitterTrace = 1, FrameNoise = 2, Layout = 3 };

/// Stream identifier for (kind, index) pairs; distinct pairs never collide
/// for index < 2^48.
constexpr std::uint64_t stream_id(StreamKind kind, std::uint64_t index) {
  return (static_cast<std::uint64_t>(kind) << 48) ^ index;
}

}  // namespace flucsr
