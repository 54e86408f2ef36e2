#pragma once

#include <array>
#include <cstdint>

namespace slate_forge {

// Philox4x32-10 counter-based generator. A stream is (seed, stream id); the
// counter walks through blocks of four 32-bit words. Child streams get a
// fresh stream id and never overlap their parent or siblings in practice.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed), stream_(stream_id) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_; }
    /// 32-bit words consumed so far.
    std::uint64_t position() const noexcept { return block_ * 4 - static_cast<std::uint64_t>(available_); }

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform in the open interval (0, 1).
    double uniform() noexcept;
    /// Standard normal via Box-Muller.
    double normal() noexcept;
    /// Standard Gumbel, -log(-log u).
    double gumbel() noexcept;
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;

    /// Independent child stream `child` of this stream. Does not advance `*this`.
    RngStream split(std::uint64_t child) const noexcept;

    /// Raw Philox block for (key, counter); exposed for known-answer tests.
    static std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                     std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int available_ = 0;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

}  // namespace slate_forge
