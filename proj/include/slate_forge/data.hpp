#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "slate_forge/core.hpp"

namespace slate_forge {

/// Binary user x item interactions; user ids are 0..U-1, item ids 0..P-1.
class InteractionDataset {
public:
    InteractionDataset() = default;
    /// Throws ValidationError on an item id >= actions or a repeated item
    /// within one user.
    InteractionDataset(std::size_t actions, std::vector<std::vector<ActionId>> per_user);

    std::size_t users() const noexcept { return items_.size(); }
    std::size_t actions() const noexcept { return actions_; }
    std::size_t interactions() const noexcept { return total_; }
    double density() const noexcept;
    const ItemSet& items(std::size_t user) const noexcept { return items_[user]; }

    friend bool operator==(const InteractionDataset&, const InteractionDataset&) = default;

private:
    std::size_t actions_ = 0;
    std::size_t total_ = 0;
    std::vector<ItemSet> items_;
};

/// CSV with header "user_id,item_id". U and P default to max id + 1.
/// Throws IoError, ParseError (with line number) on malformed lines, and
/// ValidationError on duplicate pairs or ids beyond the given bounds.
InteractionDataset load_interactions(const std::filesystem::path& path, std::optional<std::size_t> actions = {},
                                     std::optional<std::size_t> users = {});
/// Writes pairs sorted by user then item.
void save_interactions(const InteractionDataset& ds, const std::filesystem::path& path);

struct SyntheticConfig {
    std::size_t users = 1000;
    std::size_t actions = 5000;
    std::size_t latent_dim = 8;   ///< rank of the interaction logits
    double density = 0.01;        ///< target fraction of (user, item) pairs
    double signal = 3.0;          ///< scale of the low-rank logit term
    double popularity = 1.0;      ///< standard deviation of per-item logit offsets
    std::uint64_t seed = 0;
};

/// Bernoulli interactions with logit signal * z_u^T w_i / sqrt(L_true) + c_i + b,
/// z, w standard normal, c_i ~ N(0, popularity^2), b calibrated to the target
/// density. Throws InvalidArgument unless density is in (0, 1) and sizes are positive.
InteractionDataset generate_synthetic(const SyntheticConfig& config);

/// Per-user partition of interactions into observed X and hidden Y.
struct SessionSplit {
    std::vector<std::uint32_t> user_ids;  ///< original user id of each retained user
    std::vector<ItemSet> observed;
    std::vector<ItemSet> hidden;
    double ratio = 0.5;
    std::uint64_t seed = 0;
    std::size_t dropped = 0;              ///< users with fewer than two interactions

    std::size_t size() const noexcept { return user_ids.size(); }
};

/// Random per-user split with round(ratio * n) observed items, clamped to
/// [1, n - 1]. Users with fewer than two interactions are dropped and counted.
/// Throws InvalidArgument unless ratio is in (0, 1).
SessionSplit split_sessions(const InteractionDataset& ds, double ratio = 0.5, std::uint64_t seed = 0);

/// Users of a split divided into training and validation (indices into the split).
struct UserPartition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

/// Holds out round(fraction * n) users for validation, at least one when
/// n >= 2. Throws InvalidArgument unless fraction is in [0, 1).
UserPartition partition_users(const SessionSplit& split, double validation_fraction = 0.1, std::uint64_t seed = 0);

/// Dataset made of the observed halves only (one row per retained user).
InteractionDataset observed_interactions(const SessionSplit& split, std::size_t actions);

struct SvdOptions {
    std::size_t dim = 32;
    std::size_t iterations = 6;   ///< subspace (power) iterations
    std::size_t oversample = 10;
    std::uint64_t seed = 0;
};

struct SvdResult {
    std::vector<double> singular_values;  ///< descending, length L
    std::vector<double> left;             ///< U x L, column-major
    std::vector<double> right;            ///< P x L, column-major
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Rank-L truncated SVD of the binary interaction matrix by randomized
/// subspace iteration. Throws InvalidArgument unless 1 <= L <= min(U, P).
SvdResult truncated_svd(const InteractionDataset& ds, const SvdOptions& options);

/// beta_a = Sigma V_a: singular-value weighted right singular vectors.
EmbeddingMatrix embeddings_from_svd(const SvdResult& svd);

EmbeddingMatrix compute_svd_embeddings(const InteractionDataset& ds, std::size_t dim, std::size_t iterations = 6,
                                       std::uint64_t seed = 0);

/// SLEB format: "SLEB", version u32, L u32, P u64, then P*L float32
/// column-major. Values are rounded to float on save.
void save_embeddings(const EmbeddingMatrix& beta, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

/// sum_k 1[a_k in hidden] / 2^(k-1).
double slate_reward(const Slate& slate, const ItemSet& hidden);

}  // namespace slate_forge
