#pragma once

#include <array>
#include <cstdint>

namespace qfin {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (key, counter), so streams are reproducible
/// bit-for-bit on every platform.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Sequential draws from one Philox stream. The key is the 64-bit seed; the
/// counter's upper half is the stream id and its lower half the block index.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint64_t stream) noexcept;

    std::uint32_t next_u32() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Standard normal via Box-Muller.
    double normal() noexcept;

private:
    PhiloxKey key_;
    PhiloxCounter counter_;
    PhiloxCounter block_{};
    unsigned used_ = 4;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline constexpr const char* kGeneratorName = "philox4x32-10";

} // namespace qfin
