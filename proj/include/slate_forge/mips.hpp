#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "slate_forge/core.hpp"
#include "slate_forge/rng.hpp"

namespace slate_forge {

/// Top-K maximum inner product search over a fixed embedding matrix.
class MipsIndex {
public:
    virtual ~MipsIndex() = default;
    /// K distinct actions ordered by decreasing exact h^T beta_a (ties by id).
    /// Throws InvalidArgument when K > P.
    virtual Slate query(std::span<const double> h, std::size_t k) const = 0;
    virtual const EmbeddingMatrix& embeddings() const noexcept = 0;
    virtual bool exact() const noexcept = 0;
};

/// Brute-force scan; results are exactly `decide`.
class ExactIndex final : public MipsIndex {
public:
    explicit ExactIndex(const EmbeddingMatrix& beta) noexcept : beta_(&beta) {}
    Slate query(std::span<const double> h, std::size_t k) const override { return decide(*beta_, h, k); }
    const EmbeddingMatrix& embeddings() const noexcept override { return *beta_; }
    bool exact() const noexcept override { return true; }

private:
    const EmbeddingMatrix* beta_;
};

struct ApproxParams {
    std::size_t max_degree = 16;   ///< links per node on upper layers; layer 0 keeps twice as many
    std::size_t build_beam = 128;  ///< candidate list width while inserting
    std::size_t query_beam = 128;  ///< default candidate list width at query time
};

/// Layered navigable small-world graph searched directly with inner products.
/// Immutable after build; concurrent queries are safe. The index holds a
/// reference to the embedding matrix, which must outlive it.
class ApproxIndex final : public MipsIndex {
public:
    /// Throws InvalidArgument when max_degree < 2 or build_beam == 0.
    static ApproxIndex build(const EmbeddingMatrix& beta, const ApproxParams& params, RngStream rng);

    Slate query(std::span<const double> h, std::size_t k) const override { return query(h, k, query_beam_); }
    Slate query(std::span<const double> h, std::size_t k, std::size_t beam) const;
    const EmbeddingMatrix& embeddings() const noexcept override { return *beta_; }
    bool exact() const noexcept override { return false; }

    std::size_t query_beam() const noexcept { return query_beam_; }
    void set_query_beam(std::size_t beam) noexcept { query_beam_ = beam == 0 ? 1 : beam; }
    std::size_t max_degree() const noexcept { return max_degree_; }
    std::size_t layer_count() const noexcept { return upper_.size() + 1; }
    ActionId entry_point() const noexcept { return entry_; }
    /// Out-links of `node` on `layer` (empty when the node is absent there).
    std::span<const std::uint32_t> neighbors(std::size_t layer, ActionId node) const noexcept;
    /// Number of nodes reachable from the entry point along layer-0 links.
    std::size_t reachable_count() const;

    /// Binary persistence (SLMI format, see README). `load` validates the
    /// header against `beta` and throws ParseError / IoError.
    void save(const std::filesystem::path& path) const;
    static ApproxIndex load(const std::filesystem::path& path, const EmbeddingMatrix& beta,
                            std::size_t query_beam = ApproxParams{}.query_beam);

private:
    struct UpperLayer {
        std::vector<std::uint32_t> nodes;      // sorted
        std::vector<std::uint64_t> offsets;    // nodes.size() + 1
        std::vector<std::uint32_t> links;
    };

    ApproxIndex() = default;
    void build_vectors();

    const EmbeddingMatrix* beta_ = nullptr;
    std::vector<float> vectors_;               // float copy used while traversing
    std::size_t max_degree_ = 0;
    std::size_t query_beam_ = 128;
    ActionId entry_ = 0;
    std::vector<std::uint64_t> offsets0_;      // layer 0 CSR
    std::vector<std::uint32_t> links0_;
    std::vector<UpperLayer> upper_;            // layers 1..top

    friend class ApproxIndexBuilder;
};

struct RecallReport {
    std::size_t k = 0;
    double recall = 0.0;
    std::size_t query_count = 0;
};

/// Mean over queries of |approx ∩ exact| / K.
RecallReport measure_recall(const MipsIndex& approx, const MipsIndex& exact, std::span<const LatentVector> queries,
                            std::size_t k);

}  // namespace slate_forge
