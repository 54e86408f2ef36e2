#include "slate_forge/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slate_forge/error.hpp"

namespace slate_forge {

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

// ---------------------------------------------------------------- Slate

Slate::Slate(std::vector<ActionId> items) : items_(std::move(items)) {
    if (items_.empty()) throw InvalidArgument("slate must contain at least one action");
    std::vector<ActionId> sorted = items_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw InvalidArgument("slate contains duplicate actions");
}

Slate Slate::unchecked(std::vector<ActionId> items) noexcept {
    Slate s;
    s.items_ = std::move(items);
    return s;
}

bool Slate::contains(ActionId a) const noexcept {
    return std::find(items_.begin(), items_.end(), a) != items_.end();
}

// ---------------------------------------------------------------- ItemSet

ItemSet::ItemSet(std::vector<ActionId> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
}

bool ItemSet::contains(ActionId a) const noexcept {
    return std::binary_search(items_.begin(), items_.end(), a);
}

// ---------------------------------------------------------------- EmbeddingMatrix

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t actions, std::vector<double> column_major)
    : dim_(dim), actions_(actions), data_(std::move(column_major)) {
    if (dim_ == 0 || actions_ == 0) throw InvalidArgument("embedding matrix needs L >= 1 and P >= 1");
    if (data_.size() != dim_ * actions_)
        throw InvalidArgument("embedding data has " + std::to_string(data_.size()) + " values, expected " +
                              std::to_string(dim_ * actions_));
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidArgument("embedding matrix has non-finite entries");
    norms_.resize(actions_);
    for (std::size_t a = 0; a < actions_; ++a) {
        const auto col = column(static_cast<ActionId>(a));
        norms_[a] = std::sqrt(dot(col, col));
    }
}

double EmbeddingMatrix::mean_norm() const noexcept {
    return std::accumulate(norms_.begin(), norms_.end(), 0.0) / static_cast<double>(actions_);
}

std::vector<double> EmbeddingMatrix::scores(std::span<const double> h) const {
    std::vector<double> out(actions_);
    for (std::size_t a = 0; a < actions_; ++a) out[a] = score(h, static_cast<ActionId>(a));
    return out;
}

// ---------------------------------------------------------------- Matrix / params

Matrix Matrix::identity(std::size_t n, double scale) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
    return m;
}

namespace {

void check_square_finite(const Matrix& m, std::size_t dim, const char* name) {
    if (m.rows != dim || m.cols != dim || m.values.size() != dim * dim)
        throw ConfigError(std::string(name) + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
    for (double v : m.values)
        if (!std::isfinite(v)) throw ConfigError(std::string(name) + " has non-finite entries");
}

inline double sigmoid(double z) noexcept { return 1.0 / (1.0 + std::exp(-z)); }

// out_j = sum_i v_i W(i, j) for a row-major dim x dim block.
void row_times(std::span<const double> v, std::span<const double> w, std::size_t dim, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const double* row = w.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) out[j] += vi * row[j];
    }
}

}  // namespace

PolicyParams PolicyParams::linear(const Matrix& theta) {
    if (theta.rows == 0) throw ConfigError("theta must be non-empty");
    check_square_finite(theta, theta.rows, "theta");
    PolicyParams p;
    p.kind_ = ParamKind::Linear;
    p.dim_ = theta.rows;
    p.flat_ = theta.values;
    return p;
}

PolicyParams PolicyParams::two_layer(const Matrix& theta1, const Matrix& theta2) {
    if (theta1.rows == 0) throw ConfigError("theta1 must be non-empty");
    check_square_finite(theta1, theta1.rows, "theta1");
    check_square_finite(theta2, theta1.rows, "theta2");
    PolicyParams p;
    p.kind_ = ParamKind::TwoLayer;
    p.dim_ = theta1.rows;
    p.flat_ = theta1.values;
    p.flat_.insert(p.flat_.end(), theta2.values.begin(), theta2.values.end());
    return p;
}

PolicyParams PolicyParams::initial(ParamKind kind, std::size_t dim) {
    if (kind == ParamKind::Linear) return linear(Matrix::identity(dim, 0.1));
    return two_layer(Matrix::identity(dim, 1.0), Matrix::identity(dim, 0.1));
}

LatentVector context_embedding(const PolicyParams& params, std::span<const double> m) {
    const std::size_t dim = params.dim();
    if (m.size() != dim)
        throw ConfigError("mean embedding has length " + std::to_string(m.size()) + ", policy expects " +
                          std::to_string(dim));
    LatentVector h(dim);
    if (params.kind() == ParamKind::Linear) {
        row_times(m, params.block(0), dim, h);
        return h;
    }
    LatentVector hidden(dim);
    row_times(m, params.block(0), dim, hidden);
    for (double& z : hidden) z = sigmoid(z);
    row_times(hidden, params.block(1), dim, h);
    return h;
}

std::vector<double> backprop_embedding(const PolicyParams& params, std::span<const double> m,
                                       std::span<const double> grad_h) {
    const std::size_t dim = params.dim();
    if (m.size() != dim || grad_h.size() != dim) throw ConfigError("backprop dimension mismatch");
    std::vector<double> grad(params.size(), 0.0);
    // d/dW(i, j) of (v W)_j = v_i, so dW = v outer grad.
    auto outer = [dim](std::span<const double> v, std::span<const double> g, double* out) {
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] = v[i] * g[j];
    };
    if (params.kind() == ParamKind::Linear) {
        outer(m, grad_h, grad.data());
        return grad;
    }
    LatentVector hidden(dim);
    row_times(m, params.block(0), dim, hidden);
    for (double& z : hidden) z = sigmoid(z);
    outer(hidden, grad_h, grad.data() + dim * dim);
    // grad wrt hidden = theta2 * grad_h, then through the sigmoid.
    const auto theta2 = params.block(1);
    LatentVector grad_z(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += theta2[i * dim + j] * grad_h[j];
        grad_z[i] = s * hidden[i] * (1.0 - hidden[i]);
    }
    outer(m, grad_z, grad.data());
    return grad;
}

// ---------------------------------------------------------------- top-K

namespace {

struct Scored {
    double score;
    ActionId id;
};

// a ranks ahead of b.
inline bool ahead(const Scored& a, const Scored& b) noexcept {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
}

template <class ScoreFn>
Slate select_top_k(std::size_t count, std::size_t k, ScoreFn&& score_of) {
    if (k == 0 || k > count)
        throw InvalidArgument("K must be in [1, P]; got K=" + std::to_string(k) + " with P=" + std::to_string(count));
    // Min-heap on `ahead`: the root is the weakest of the current top-K.
    std::vector<Scored> heap;
    heap.reserve(k);
    const auto cmp = [](const Scored& a, const Scored& b) { return ahead(a, b); };
    for (std::size_t a = 0; a < count; ++a) {
        const Scored candidate{score_of(a), static_cast<ActionId>(a)};
        if (heap.size() < k) {
            heap.push_back(candidate);
            std::push_heap(heap.begin(), heap.end(), cmp);
        } else if (ahead(candidate, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), cmp);
            heap.back() = candidate;
            std::push_heap(heap.begin(), heap.end(), cmp);
        }
    }
    std::sort(heap.begin(), heap.end(), cmp);
    std::vector<ActionId> items(k);
    for (std::size_t i = 0; i < k; ++i) items[i] = heap[i].id;
    return Slate::unchecked(std::move(items));
}

}  // namespace

Slate decide(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k) {
    if (h.size() != beta.dim()) throw ConfigError("query length does not match embedding dimension");
    return select_top_k(beta.actions(), k, [&](std::size_t a) { return beta.score(h, static_cast<ActionId>(a)); });
}

Slate top_k(std::span<const double> scores, std::size_t k) {
    return select_top_k(scores.size(), k, [&](std::size_t a) { return scores[a]; });
}

LatentVector mean_embedding(const EmbeddingMatrix& beta, std::span<const ActionId> observed) {
    if (observed.empty()) throw InvalidArgument("mean embedding of an empty observed set");
    LatentVector m(beta.dim(), 0.0);
    for (ActionId a : observed) {
        if (a >= beta.actions()) throw InvalidArgument("observed action " + std::to_string(a) + " outside catalog");
        const auto col = beta.column(a);
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += col[j];
    }
    const double inv = 1.0 / static_cast<double>(observed.size());
    for (double& v : m) v *= inv;
    return m;
}

}  // namespace slate_forge
