#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "slate_forge/core.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/rng.hpp"

namespace slate_forge {

struct RejectionStats {
    std::uint64_t accepted = 0;
    std::uint64_t proposed = 0;
    std::uint64_t head_hits = 0;
    std::uint64_t tail_hits = 0;
    /// Tail proposals scoring above the envelope (only possible with an
    /// approximate index that missed part of the true top-K_env).
    std::uint64_t envelope_violations = 0;

    RejectionStats& operator+=(const RejectionStats& other) noexcept;
};

/// Exact softmax sampler over all P actions using a top-K_env MIPS head and a
/// uniform tail envelope. With s_K the K_env-th best score, the head holds the
/// residual mass exp(s_a) - exp(s_K) of the top items and the tail proposes a
/// uniform action q, accepted with probability min(1, exp(s_q - s_K)).
class RejectionSampler {
public:
    /// Throws InvalidArgument unless 1 <= K_env <= P. In strict mode a tail
    /// proposal above the envelope from an action outside the head switches the
    /// head to an exhaustive top-K_env and restarts the draw.
    RejectionSampler(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k_env,
                     const MipsIndex& index, bool strict = true);

    /// One softmax draw. `excluded` (length P, may be empty) marks actions to
    /// reject and redraw, which yields the softmax conditioned on the rest.
    ActionId draw(RngStream& rng, RejectionStats& stats, std::span<const char> excluded = {});

    /// PL slate: K draws, each excluding the actions already placed.
    Slate draw_slate(std::size_t k, RngStream& rng, RejectionStats& stats);

    double envelope_score() const noexcept { return s_env_; }
    std::span<const ActionId> head() const noexcept { return head_; }

private:
    void build_head(const MipsIndex& index);

    const EmbeddingMatrix* beta_;
    LatentVector h_;
    std::size_t k_env_;
    bool strict_;
    bool exhaustive_head_ = false;
    std::vector<ActionId> head_;
    std::vector<double> head_weight_;  // exp(s_a - s_max) - exp(s_K - s_max)
    double s_max_ = 0.0;
    double s_env_ = 0.0;
    double tail_mass_ = 0.0;           // P * exp(s_K - s_max)
    std::vector<char> in_head_;
};

std::pair<ActionId, RejectionStats> rejection_sample_categorical(const EmbeddingMatrix& beta, std::span<const double> h,
                                                                 std::size_t k_env, const MipsIndex& index,
                                                                 RngStream& rng, bool strict = true);

/// Throws InvalidArgument unless 1 <= K <= P.
Slate rejection_sample_pl_slate(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k,
                                std::size_t k_env, const MipsIndex& index, RngStream& rng,
                                RejectionStats* stats = nullptr, bool strict = true);

}  // namespace slate_forge
