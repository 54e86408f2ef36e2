#include "slate_forge/data.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>

#include "binary_io.hpp"
#include "slate_forge/error.hpp"
#include "slate_forge/parallel.hpp"
#include "slate_forge/rng.hpp"

namespace slate_forge {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::string_view kCsvHeader = "user_id,item_id";
constexpr std::uint32_t kEmbeddingVersion = 1;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::uint64_t parse_id(std::string_view field, std::size_t line, const char* name) {
    field = trim(field);
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError(std::string("invalid ") + name + " '" + std::string(field) + "'", line);
    if (value > std::numeric_limits<ActionId>::max()) throw ParseError(std::string(name) + " exceeds 32 bits", line);
    return value;
}

// Binary interaction matrix in compressed sparse row form.
struct Csr {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> offsets;
    std::vector<ActionId> indices;
};

Csr user_major(const InteractionDataset& ds) {
    Csr m{ds.users(), ds.actions(), {0}, {}};
    m.indices.reserve(ds.interactions());
    for (std::size_t u = 0; u < ds.users(); ++u) {
        for (ActionId a : ds.items(u)) m.indices.push_back(a);
        m.offsets.push_back(m.indices.size());
    }
    return m;
}

Csr transpose(const Csr& m) {
    Csr t{m.cols, m.rows, std::vector<std::size_t>(m.cols + 1, 0), std::vector<ActionId>(m.indices.size())};
    for (ActionId j : m.indices) ++t.offsets[j + 1];
    std::partial_sum(t.offsets.begin(), t.offsets.end(), t.offsets.begin());
    std::vector<std::size_t> fill(t.offsets.begin(), t.offsets.end() - 1);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t p = m.offsets[r]; p < m.offsets[r + 1]; ++p)
            t.indices[fill[m.indices[p]]++] = static_cast<ActionId>(r);
    return t;
}

// out = M * x for a binary sparse M; rows are processed in parallel blocks.
RowMatrix multiply(const Csr& m, const RowMatrix& x) {
    RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(m.rows), x.cols());
    constexpr std::size_t kBlock = 256;
    const std::size_t blocks = (m.rows + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t end = std::min(m.rows, (b + 1) * kBlock);
        for (std::size_t r = b * kBlock; r < end; ++r) {
            auto row = out.row(static_cast<Eigen::Index>(r));
            for (std::size_t p = m.offsets[r]; p < m.offsets[r + 1]; ++p)
                row += x.row(static_cast<Eigen::Index>(m.indices[p]));
        }
    });
    return out;
}

RowMatrix orthonormal_basis(const RowMatrix& y) {
    Eigen::MatrixXd dense = y;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(dense);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dense.rows(), dense.cols());
    return q;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------- dataset

InteractionDataset::InteractionDataset(std::size_t actions, std::vector<std::vector<ActionId>> per_user)
    : actions_(actions) {
    items_.reserve(per_user.size());
    for (std::size_t u = 0; u < per_user.size(); ++u) {
        auto& items = per_user[u];
        std::sort(items.begin(), items.end());
        if (std::adjacent_find(items.begin(), items.end()) != items.end())
            throw ValidationError("duplicate interaction for user " + std::to_string(u));
        if (!items.empty() && items.back() >= actions)
            throw ValidationError("item id " + std::to_string(items.back()) + " out of range for P=" +
                                  std::to_string(actions));
        total_ += items.size();
        items_.emplace_back(std::move(items));
    }
}

double InteractionDataset::density() const noexcept {
    const double cells = static_cast<double>(users()) * static_cast<double>(actions_);
    return cells > 0.0 ? static_cast<double>(total_) / cells : 0.0;
}

InteractionDataset load_interactions(const std::filesystem::path& path, std::optional<std::size_t> actions,
                                     std::optional<std::size_t> users) try {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open interaction file", path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCsvHeader)
        throw ParseError("expected header '" + std::string(kCsvHeader) + "'", 1);

    std::vector<std::vector<ActionId>> per_user;
    std::uint64_t max_item = 0;
    bool any = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos)
            throw ParseError("expected two comma-separated fields", line_no);
        const std::uint64_t u = parse_id(row.substr(0, comma), line_no, "user_id");
        const std::uint64_t a = parse_id(row.substr(comma + 1), line_no, "item_id");
        if (users && u >= *users)
            throw ValidationError("line " + std::to_string(line_no) + ": user id " + std::to_string(u) +
                                  " out of range for U=" + std::to_string(*users));
        if (actions && a >= *actions)
            throw ValidationError("line " + std::to_string(line_no) + ": item id " + std::to_string(a) +
                                  " out of range for P=" + std::to_string(*actions));
        if (u >= per_user.size()) per_user.resize(u + 1);
        per_user[u].push_back(static_cast<ActionId>(a));
        max_item = std::max(max_item, a);
        any = true;
    }
    if (users) per_user.resize(*users);
    const std::size_t p = actions ? *actions : (any ? max_item + 1 : 0);
    return InteractionDataset(p, std::move(per_user));
} catch (const ParseError& e) {
    throw e.with_path(path.string());
}

void save_interactions(const InteractionDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write interaction file", path.string());
    out << kCsvHeader << '\n';
    for (std::size_t u = 0; u < ds.users(); ++u)
        for (ActionId a : ds.items(u)) out << u << ',' << a << '\n';
    if (!out) throw IoError("write failed", path.string());
}

// ---------------------------------------------------------------- synthetic

InteractionDataset generate_synthetic(const SyntheticConfig& c) {
    if (!(c.density > 0.0 && c.density < 1.0)) throw InvalidArgument("density must be in (0, 1)");
    if (c.users == 0 || c.actions == 0 || c.latent_dim == 0)
        throw InvalidArgument("users, actions and latent dimension must be positive");
    if (c.actions > std::numeric_limits<ActionId>::max()) throw InvalidArgument("too many actions");

    const RngStream root(c.seed);
    const auto lt = static_cast<Eigen::Index>(c.latent_dim);
    const double scale = c.signal / std::sqrt(static_cast<double>(lt));
    // Row u of z and column a of w are the latent factors; bias holds c_a.
    Eigen::MatrixXd z(static_cast<Eigen::Index>(c.users), lt), w(lt, static_cast<Eigen::Index>(c.actions));
    Eigen::RowVectorXd bias(static_cast<Eigen::Index>(c.actions));
    {
        RngStream rng = root.split(0);
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index j = 0; j < lt; ++j) z(i, j) = scale * rng.normal();
        for (Eigen::Index a = 0; a < w.cols(); ++a)
            for (Eigen::Index j = 0; j < lt; ++j) w(j, a) = rng.normal();
        for (Eigen::Index a = 0; a < bias.size(); ++a) bias(a) = c.popularity * rng.normal();
    }

    // Calibrate the global offset on i.i.d. uniformly drawn (user, item) pairs.
    const std::size_t cal = std::min<std::size_t>(c.users * c.actions, std::size_t{1} << 20);
    std::vector<double> base(cal);
    {
        RngStream rng = root.split(1);
        for (double& v : base) {
            const auto u = static_cast<Eigen::Index>(rng.uniform_index(c.users));
            const auto a = static_cast<Eigen::Index>(rng.uniform_index(c.actions));
            v = z.row(u).dot(w.col(a)) + bias(a);
        }
    }
    std::vector<double> terms(cal);
    auto mean_prob = [&](double b) {
        for (std::size_t i = 0; i < cal; ++i) terms[i] = sigmoid(base[i] + b);
        return pairwise_sum(terms) / static_cast<double>(cal);
    };
    double lo = -60.0, hi = 60.0;
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < c.density ? lo : hi) = mid;
    }
    const Eigen::RowVectorXd shift = bias.array() + 0.5 * (lo + hi);

    std::vector<std::vector<ActionId>> per_user(c.users);
    constexpr std::size_t kBlock = 64;
    constexpr std::size_t kItemBlock = 512;
    const std::size_t blocks = (c.users + kBlock - 1) / kBlock;
    parallel_for(blocks, [&](std::size_t blk) {
        const std::size_t first = blk * kBlock;
        const std::size_t count = std::min(kBlock, c.users - first);
        const Eigen::MatrixXd logits =
            z.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) * w;
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t u = first + i;
            RngStream rng = root.split(2 + u);
            auto& items = per_user[u];
            const auto row = static_cast<Eigen::Index>(i);
            // Thinning: propose items at the block's largest probability q by
            // geometric skips, then accept each proposal with p_a / q.
            for (std::size_t start = 0; start < c.actions; start += kItemBlock) {
                const std::size_t stop = std::min(c.actions, start + kItemBlock);
                double top = -std::numeric_limits<double>::infinity();
                for (std::size_t a = start; a < stop; ++a) {
                    const auto ai = static_cast<Eigen::Index>(a);
                    top = std::max(top, logits(row, ai) + shift(ai));
                }
                const double q = sigmoid(top);
                const double log_miss = std::log1p(-q);
                std::size_t a = start;
                for (;;) {
                    if (q < 1.0) {
                        const double skip = std::floor(std::log(rng.uniform()) / log_miss);
                        if (skip >= static_cast<double>(stop - a)) break;
                        a += static_cast<std::size_t>(skip);
                    }
                    if (a >= stop) break;
                    const auto ai = static_cast<Eigen::Index>(a);
                    if (rng.uniform() * q < sigmoid(logits(row, ai) + shift(ai)))
                        items.push_back(static_cast<ActionId>(a));
                    ++a;
                }
            }
        }
    });
    return InteractionDataset(c.actions, std::move(per_user));
}

// ---------------------------------------------------------------- splitting

SessionSplit split_sessions(const InteractionDataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("split ratio must be in (0, 1)");
    SessionSplit split;
    split.ratio = ratio;
    split.seed = seed;
    const RngStream root(seed);
    for (std::size_t u = 0; u < ds.users(); ++u) {
        const auto items = ds.items(u).items();
        const std::size_t n = items.size();
        if (n < 2) {
            ++split.dropped;
            continue;
        }
        std::vector<ActionId> shuffled(items.begin(), items.end());
        RngStream rng = root.split(u);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.uniform_index(i + 1)]);
        const auto wanted = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
        const std::size_t n_obs = std::clamp<std::size_t>(wanted, 1, n - 1);
        split.user_ids.push_back(static_cast<std::uint32_t>(u));
        split.observed.emplace_back(std::vector<ActionId>(shuffled.begin(), shuffled.begin() + n_obs));
        split.hidden.emplace_back(std::vector<ActionId>(shuffled.begin() + n_obs, shuffled.end()));
    }
    return split;
}

UserPartition partition_users(const SessionSplit& split, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
        throw InvalidArgument("validation fraction must be in [0, 1)");
    const std::size_t n = split.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng(seed, 1);
    for (std::size_t i = n > 0 ? n - 1 : 0; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);
    auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
    if (validation_fraction > 0.0 && n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    UserPartition part;
    part.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    part.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(part.validation.begin(), part.validation.end());
    std::sort(part.train.begin(), part.train.end());
    return part;
}

InteractionDataset observed_interactions(const SessionSplit& split, std::size_t actions) {
    std::vector<std::vector<ActionId>> rows;
    rows.reserve(split.size());
    for (const ItemSet& x : split.observed) rows.emplace_back(x.begin(), x.end());
    return InteractionDataset(actions, std::move(rows));
}

// ---------------------------------------------------------------- SVD

SvdResult truncated_svd(const InteractionDataset& ds, const SvdOptions& opt) {
    const std::size_t u = ds.users();
    const std::size_t p = ds.actions();
    const std::size_t dim = opt.dim;
    if (dim == 0 || dim > std::min(u, p))
        throw InvalidArgument("L=" + std::to_string(dim) + " must be in [1, min(U, P)] with U=" + std::to_string(u) +
                              ", P=" + std::to_string(p));
    const std::size_t width = std::min(dim + opt.oversample, std::min(u, p));
    const Csr a = user_major(ds);
    const Csr at = transpose(a);

    RowMatrix omega(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(width));
    RngStream rng(opt.seed, 7);
    for (Eigen::Index i = 0; i < omega.rows(); ++i)
        for (Eigen::Index j = 0; j < omega.cols(); ++j) omega(i, j) = rng.normal();

    RowMatrix q = orthonormal_basis(multiply(a, omega));
    for (std::size_t it = 0; it < opt.iterations; ++it) {
        const RowMatrix qz = orthonormal_basis(multiply(at, q));
        q = orthonormal_basis(multiply(a, qz));
    }
    // C = A^T Q is P x width and C^T = Q^T A. With C = Q2 R and R^T = Ur S Vr^T,
    // A ~= (Q Ur) S (Q2 Vr)^T.
    const Eigen::MatrixXd c = multiply(at, q);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
    const Eigen::MatrixXd q2 = qr.householderQ() * Eigen::MatrixXd::Identity(c.rows(), c.cols());
    const Eigen::MatrixXd r = qr.matrixQR().topRows(c.cols()).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);

    const auto l = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd left = Eigen::MatrixXd(q) * svd.matrixU().leftCols(l);
    Eigen::MatrixXd right = q2 * svd.matrixV().leftCols(l);
    // Sign convention: the largest-magnitude entry of each right vector is positive.
    for (Eigen::Index j = 0; j < l; ++j) {
        Eigen::Index arg = 0;
        right.col(j).cwiseAbs().maxCoeff(&arg);
        if (right(arg, j) < 0.0) {
            right.col(j) *= -1.0;
            left.col(j) *= -1.0;
        }
    }

    SvdResult out;
    out.rows = u;
    out.cols = p;
    out.singular_values.assign(svd.singularValues().data(), svd.singularValues().data() + dim);
    out.left.assign(left.data(), left.data() + left.size());
    out.right.assign(right.data(), right.data() + right.size());
    return out;
}

EmbeddingMatrix embeddings_from_svd(const SvdResult& svd) {
    const std::size_t dim = svd.singular_values.size();
    const std::size_t p = svd.cols;
    std::vector<double> data(dim * p);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t j = 0; j < dim; ++j) data[a * dim + j] = svd.singular_values[j] * svd.right[j * p + a];
    return EmbeddingMatrix(dim, p, std::move(data));
}

EmbeddingMatrix compute_svd_embeddings(const InteractionDataset& ds, std::size_t dim, std::size_t iterations,
                                       std::uint64_t seed) {
    return embeddings_from_svd(truncated_svd(ds, SvdOptions{dim, iterations, 10, seed}));
}

// ---------------------------------------------------------------- SLEB

void save_embeddings(const EmbeddingMatrix& beta, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding file", path.string());
    out.write("SLEB", 4);
    detail::write_le<std::uint32_t>(out, kEmbeddingVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(beta.dim()));
    detail::write_le<std::uint64_t>(out, beta.actions());
    for (double v : beta.data()) detail::write_le<float>(out, static_cast<float>(v));
    if (!out) throw IoError("write failed", path.string());
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) try {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding file", path.string());
    detail::expect_magic(in, "SLEB");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kEmbeddingVersion) throw ParseError("unsupported SLEB version " + std::to_string(version), 0);
    const auto dim = detail::read_le<std::uint32_t>(in, "L");
    const auto p = detail::read_le<std::uint64_t>(in, "P");
    if (dim == 0 || p == 0) throw ParseError("SLEB header has an empty dimension", 0);
    const auto expected = static_cast<std::uintmax_t>(20 + 4 * static_cast<std::uintmax_t>(dim) * p);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec || size != expected)
        throw ParseError("SLEB payload size mismatch: expected " + std::to_string(expected) + " bytes", 0);
    std::vector<double> data(static_cast<std::size_t>(dim) * p);
    for (double& v : data) v = detail::read_le<float>(in, "embedding values");
    return EmbeddingMatrix(dim, p, std::move(data));
} catch (const ParseError& e) {
    throw e.with_path(path.string());
}

// ---------------------------------------------------------------- reward

double slate_reward(const Slate& slate, const ItemSet& hidden) {
    double reward = 0.0;
    double weight = 1.0;
    for (ActionId a : slate) {
        if (hidden.contains(a)) reward += weight;
        weight *= 0.5;
    }
    return reward;
}

}  // namespace slate_forge
