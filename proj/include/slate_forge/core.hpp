#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace slate_forge {

using ActionId = std::uint32_t;

/// Real vector of length L living in the latent space (context embeddings,
/// noise draws, mean embeddings).
using LatentVector = std::vector<double>;

/// Inner product of two equally sized vectors. Every scoring path in the
/// library goes through this function so that exact and approximate search
/// agree bit-for-bit on the scores they compare.
double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Ordered list of K >= 1 distinct actions.
class Slate {
public:
    Slate() = default;
    /// Validates length >= 1 and distinctness; throws InvalidArgument.
    explicit Slate(std::vector<ActionId> items);
    Slate(std::initializer_list<ActionId> items) : Slate(std::vector<ActionId>(items)) {}

    /// Skips validation; for producers that guarantee distinct ids.
    static Slate unchecked(std::vector<ActionId> items) noexcept;

    std::size_t size() const noexcept { return items_.size(); }
    ActionId operator[](std::size_t i) const noexcept { return items_[i]; }
    std::span<const ActionId> items() const noexcept { return items_; }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }
    bool contains(ActionId a) const noexcept;

    friend bool operator==(const Slate&, const Slate&) = default;

private:
    std::vector<ActionId> items_;
};

/// Sorted set of action ids (observed or hidden interactions of one user).
class ItemSet {
public:
    ItemSet() = default;
    explicit ItemSet(std::vector<ActionId> items);
    ItemSet(std::initializer_list<ActionId> items) : ItemSet(std::vector<ActionId>(items)) {}

    bool contains(ActionId a) const noexcept;
    std::size_t size() const noexcept { return items_.size(); }
    bool empty() const noexcept { return items_.empty(); }
    std::span<const ActionId> items() const noexcept { return items_; }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }

    friend bool operator==(const ItemSet&, const ItemSet&) = default;

private:
    std::vector<ActionId> items_;
};

/// Fixed action embeddings: L rows by P columns, stored column-major so the
/// embedding of one action is contiguous.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    /// `column_major` holds P blocks of L values. Throws InvalidArgument on
    /// empty dimensions, size mismatch or non-finite entries.
    EmbeddingMatrix(std::size_t dim, std::size_t actions, std::vector<double> column_major);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t actions() const noexcept { return actions_; }
    std::span<const double> column(ActionId a) const noexcept {
        return {data_.data() + static_cast<std::size_t>(a) * dim_, dim_};
    }
    std::span<const double> data() const noexcept { return data_; }
    double norm(ActionId a) const noexcept { return norms_[a]; }
    std::span<const double> norms() const noexcept { return norms_; }
    /// B = (1/P) sum_a ||beta_a||.
    double mean_norm() const noexcept;

    double score(std::span<const double> h, ActionId a) const noexcept { return dot(h, column(a)); }
    /// h^T beta_a for every action.
    std::vector<double> scores(std::span<const double> h) const;

private:
    std::size_t dim_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> data_;
    std::vector<double> norms_;
};

/// Small dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
    static Matrix identity(std::size_t n, double scale = 1.0);

    double& operator()(std::size_t i, std::size_t j) noexcept { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return values[i * cols + j]; }
};

enum class ParamKind { Linear, TwoLayer };

/// Parameters of the context map h_theta(m): Linear gives m * theta, TwoLayer
/// gives sigmoid(m * theta1) * theta2, all blocks L x L. Stored as one flat
/// vector (theta, or theta1 followed by theta2) so optimizers can treat every
/// variant uniformly.
class PolicyParams {
public:
    PolicyParams() = default;
    static PolicyParams linear(const Matrix& theta);
    static PolicyParams two_layer(const Matrix& theta1, const Matrix& theta2);
    /// Default initialization: Linear 0.1 * I; TwoLayer theta1 = I, theta2 = 0.1 * I.
    static PolicyParams initial(ParamKind kind, std::size_t dim);

    ParamKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return flat_.size(); }
    std::span<double> flat() noexcept { return flat_; }
    std::span<const double> flat() const noexcept { return flat_; }

    /// Block `b` (0 for theta / theta1, 1 for theta2) as a row-major view.
    std::span<const double> block(std::size_t b) const noexcept {
        return {flat_.data() + b * dim_ * dim_, dim_ * dim_};
    }

    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;

private:
    ParamKind kind_ = ParamKind::Linear;
    std::size_t dim_ = 0;
    std::vector<double> flat_;
};

/// h_theta(m). Throws ConfigError when m's length differs from params.dim().
LatentVector context_embedding(const PolicyParams& params, std::span<const double> m);

/// Reverse-mode pass: given dJ/dh, returns dJ/dtheta over params.flat().
std::vector<double> backprop_embedding(const PolicyParams& params, std::span<const double> m,
                                       std::span<const double> grad_h);

/// argsort^K of h^T beta_a: the K highest scoring actions in decreasing score
/// order, ties broken by smaller id. Throws InvalidArgument unless 1 <= K <= P.
Slate decide(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k);

/// Top-K of an arbitrary score vector with the same ordering rules as decide.
Slate top_k(std::span<const double> scores, std::size_t k);

/// M(X): average embedding of the observed actions. Throws InvalidArgument on
/// an empty set or an id outside the catalog.
LatentVector mean_embedding(const EmbeddingMatrix& beta, std::span<const ActionId> observed);

}  // namespace slate_forge
