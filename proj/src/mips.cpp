#include "slate_forge/mips.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <string>
#include <unordered_set>

#include "binary_io.hpp"
#include "slate_forge/error.hpp"

namespace slate_forge {

namespace {

constexpr std::uint32_t kIndexVersion = 1;
constexpr std::size_t kMaxLevel = 24;

inline float dot_f32(const float* a, const float* b, std::size_t n) noexcept {
    float s0 = 0.f, s1 = 0.f, s2 = 0.f, s3 = 0.f, s4 = 0.f, s5 = 0.f, s6 = 0.f, s7 = 0.f;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

struct Candidate {
    float sim;
    std::uint32_t id;
};

// Higher similarity first, then smaller id.
struct Better {
    bool operator()(const Candidate& a, const Candidate& b) const noexcept {
        return a.sim > b.sim || (a.sim == b.sim && a.id < b.id);
    }
};
struct Worse {
    bool operator()(const Candidate& a, const Candidate& b) const noexcept { return Better{}(b, a); }
};

// Visited marks backed by a catalog-sized tag array; used while building.
class EpochVisited {
public:
    explicit EpochVisited(std::size_t n) : tags_(n, 0) {}
    void reset() {
        if (++epoch_ == 0) {
            std::fill(tags_.begin(), tags_.end(), 0);
            epoch_ = 1;
        }
    }
    bool insert(std::uint32_t id) noexcept {
        if (tags_[id] == epoch_) return false;
        tags_[id] = epoch_;
        return true;
    }

private:
    std::vector<std::uint32_t> tags_;
    std::uint32_t epoch_ = 0;
};

// Open-addressing set whose footprint follows the number of visited nodes,
// not the catalog size. Used at query time.
class HashVisited {
public:
    HashVisited() : slots_(256, kEmpty) {}
    /// Empties the set and keeps its capacity.
    void clear() noexcept {
        std::fill(slots_.begin(), slots_.end(), kEmpty);
        size_ = 0;
    }
    bool insert(std::uint32_t id) {
        if ((size_ + 1) * 2 > slots_.size()) grow();
        return place(id);
    }

private:
    static constexpr std::uint32_t kEmpty = 0xFFFFFFFFu;
    bool place(std::uint32_t id) noexcept {
        const std::size_t mask = slots_.size() - 1;
        std::size_t i = (static_cast<std::size_t>(id) * 0x9E3779B1u) & mask;
        while (slots_[i] != kEmpty) {
            if (slots_[i] == id) return false;
            i = (i + 1) & mask;
        }
        slots_[i] = id;
        ++size_;
        return true;
    }
    void grow() {
        std::vector<std::uint32_t> old(slots_.size() * 2, kEmpty);
        old.swap(slots_);
        size_ = 0;
        for (std::uint32_t id : old)
            if (id != kEmpty) place(id);
    }
    std::vector<std::uint32_t> slots_;
    std::size_t size_ = 0;
};

// Heaps of one beam search, kept between calls so repeated searches reuse
// their storage.
struct SearchBuffers {
    std::vector<Candidate> frontier;  // heap, best on top
    std::vector<Candidate> results;   // heap, worst on top
};

// Best-first beam search on one layer. Writes up to `ef` candidates sorted
// best first into `out`. `neighbors(node)` yields a span of out-links.
template <class Neighbors, class Visited>
void beam_search(const float* query, const float* vectors, std::size_t dim, const std::vector<Candidate>& entries,
                 std::size_t ef, Neighbors&& neighbors, Visited& visited, SearchBuffers& buf,
                 std::vector<Candidate>& out) {
    auto& frontier = buf.frontier;
    auto& results = buf.results;
    frontier.clear();
    results.clear();
    const auto push_result = [&](const Candidate& c) {
        results.push_back(c);
        std::push_heap(results.begin(), results.end(), Better{});
        if (results.size() > ef) {
            std::pop_heap(results.begin(), results.end(), Better{});
            results.pop_back();
        }
    };
    for (const Candidate& e : entries) {
        if (!visited.insert(e.id)) continue;
        frontier.push_back(e);
        std::push_heap(frontier.begin(), frontier.end(), Worse{});
        push_result(e);
    }
    while (!frontier.empty()) {
        const Candidate current = frontier.front();
        if (results.size() >= ef && Better{}(results.front(), current)) break;
        std::pop_heap(frontier.begin(), frontier.end(), Worse{});
        frontier.pop_back();
        for (std::uint32_t next : neighbors(current.id)) {
            if (!visited.insert(next)) continue;
            const Candidate c{dot_f32(query, vectors + static_cast<std::size_t>(next) * dim, dim), next};
            if (results.size() < ef || Better{}(c, results.front())) {
                frontier.push_back(c);
                std::push_heap(frontier.begin(), frontier.end(), Worse{});
                push_result(c);
            }
        }
    }
    std::sort_heap(results.begin(), results.end(), Better{});
    out.assign(results.begin(), results.end());
}

}  // namespace

// ---------------------------------------------------------------- builder

class ApproxIndexBuilder {
public:
    ApproxIndexBuilder(const EmbeddingMatrix& beta, const ApproxParams& params, RngStream rng, ApproxIndex& index)
        : beta_(beta), params_(params), rng_(rng), index_(index), dim_(beta.dim()), count_(beta.actions()),
          cap0_(2 * params.max_degree), visited_(beta.actions()) {}

    void run() {
        index_.beta_ = &beta_;
        index_.max_degree_ = params_.max_degree;
        index_.query_beam_ = params_.query_beam;
        index_.build_vectors();
        vectors_ = index_.vectors_.data();

        links0_.assign(count_ * cap0_, 0);
        degree0_.assign(count_, 0);
        level_.assign(count_, 0);
        upper_slot_.assign(count_, kNoSlot);

        const double level_scale = 1.0 / std::log(static_cast<double>(std::max<std::size_t>(params_.max_degree, 2)));
        for (std::size_t node = 0; node < count_; ++node) {
            const double u = rng_.uniform();
            const auto lvl = static_cast<std::size_t>(std::floor(-std::log(u) * level_scale));
            insert(static_cast<std::uint32_t>(node), std::min(lvl, kMaxLevel));
        }
        finalize();
    }

private:
    static constexpr std::uint32_t kNoSlot = 0xFFFFFFFFu;

    const float* vec(std::uint32_t id) const noexcept { return vectors_ + static_cast<std::size_t>(id) * dim_; }
    float sim(std::uint32_t a, std::uint32_t b) const noexcept { return dot_f32(vec(a), vec(b), dim_); }

    std::span<const std::uint32_t> links(std::size_t layer, std::uint32_t node) const noexcept {
        if (layer == 0) return {links0_.data() + static_cast<std::size_t>(node) * cap0_, degree0_[node]};
        const auto& l = upper_links_[upper_slot_[node]][layer - 1];
        return {l.data(), l.size()};
    }

    void set_links(std::size_t layer, std::uint32_t node, const std::vector<Candidate>& chosen) {
        if (layer == 0) {
            std::uint32_t* dst = links0_.data() + static_cast<std::size_t>(node) * cap0_;
            for (std::size_t i = 0; i < chosen.size(); ++i) dst[i] = chosen[i].id;
            degree0_[node] = static_cast<std::uint32_t>(chosen.size());
            return;
        }
        auto& l = upper_links_[upper_slot_[node]][layer - 1];
        l.clear();
        for (const Candidate& c : chosen) l.push_back(c.id);
    }

    // Diversity heuristic: keep a candidate only if it is closer (in inner
    // product) to the base point than to every neighbor already kept. Pruned
    // candidates backfill remaining slots so hubs do not starve small-norm nodes.
    std::vector<Candidate> select(const std::vector<Candidate>& sorted, std::size_t limit) const {
        std::vector<Candidate> kept;
        std::vector<Candidate> pruned;
        kept.reserve(limit);
        for (const Candidate& c : sorted) {
            if (kept.size() >= limit) break;
            bool diverse = true;
            for (const Candidate& s : kept) {
                if (sim(c.id, s.id) > c.sim) {
                    diverse = false;
                    break;
                }
            }
            (diverse ? kept : pruned).push_back(c);
        }
        for (std::size_t i = 0; kept.size() < limit && i < pruned.size(); ++i) kept.push_back(pruned[i]);
        return kept;
    }

    template <class Visited>
    std::vector<Candidate> search(const float* q, const std::vector<Candidate>& entries, std::size_t ef,
                                  std::size_t layer, Visited& visited) const {
        std::vector<Candidate> out;
        beam_search(q, vectors_, dim_, entries, ef, [&](std::uint32_t n) { return links(layer, n); }, visited,
                    buffers_, out);
        return out;
    }

    void insert(std::uint32_t node, std::size_t lvl) {
        level_[node] = static_cast<std::uint8_t>(lvl);
        if (lvl > 0) {
            upper_slot_[node] = static_cast<std::uint32_t>(upper_links_.size());
            upper_links_.emplace_back(lvl);
        }
        if (node == 0) {
            entry_ = node;
            top_level_ = lvl;
            return;
        }
        const float* q = vec(node);
        std::vector<Candidate> entries{{dot_f32(q, vec(entry_), dim_), entry_}};
        for (std::size_t layer = top_level_; layer > lvl; --layer) {
            visited_.reset();
            entries = search(q, entries, 1, layer, visited_);
        }
        for (std::size_t layer = std::min(lvl, top_level_) + 1; layer-- > 0;) {
            visited_.reset();
            std::vector<Candidate> found = search(q, entries, params_.build_beam, layer, visited_);
            const std::vector<Candidate> chosen = select(found, params_.max_degree);
            set_links(layer, node, chosen);
            const std::size_t cap = layer == 0 ? cap0_ : params_.max_degree;
            for (const Candidate& c : chosen) connect(c.id, node, layer, cap);
            entries = std::move(found);
        }
        if (lvl > top_level_) {
            top_level_ = lvl;
            entry_ = node;
        }
    }

    void connect(std::uint32_t from, std::uint32_t to, std::size_t layer, std::size_t cap) {
        const auto current = links(layer, from);
        if (std::find(current.begin(), current.end(), to) != current.end()) return;
        if (current.size() < cap) {
            if (layer == 0) {
                links0_[static_cast<std::size_t>(from) * cap0_ + degree0_[from]] = to;
                ++degree0_[from];
            } else {
                upper_links_[upper_slot_[from]][layer - 1].push_back(to);
            }
            return;
        }
        std::vector<Candidate> pool;
        pool.reserve(current.size() + 1);
        for (std::uint32_t n : current) pool.push_back({sim(from, n), n});
        pool.push_back({sim(from, to), to});
        std::sort(pool.begin(), pool.end(), Better{});
        set_links(layer, from, select(pool, cap));
    }

    void finalize() {
        // Layer 0 to CSR, then add repair links until every node is reachable
        // from the entry point.
        std::vector<std::vector<std::uint32_t>> extra(count_);
        std::vector<char> reached(count_, 0);
        std::vector<std::uint32_t> stack;
        auto flood = [&](std::uint32_t start) {
            if (reached[start]) return;
            reached[start] = 1;
            stack.push_back(start);
            while (!stack.empty()) {
                const std::uint32_t n = stack.back();
                stack.pop_back();
                auto visit = [&](std::uint32_t m) {
                    if (!reached[m]) {
                        reached[m] = 1;
                        stack.push_back(m);
                    }
                };
                for (std::uint32_t m : links(0, n)) visit(m);
                for (std::uint32_t m : extra[n]) visit(m);
            }
        };
        flood(entry_);
        for (;;) {
            bool progress = false;
            std::uint32_t first_missing = kNoSlot;
            for (std::size_t u = 0; u < count_; ++u) {
                if (reached[u]) continue;
                const auto out = links(0, static_cast<std::uint32_t>(u));
                const auto via = std::find_if(out.begin(), out.end(), [&](std::uint32_t v) { return reached[v]; });
                if (via == out.end()) {
                    if (first_missing == kNoSlot) first_missing = static_cast<std::uint32_t>(u);
                    continue;
                }
                extra[*via].push_back(static_cast<std::uint32_t>(u));
                flood(static_cast<std::uint32_t>(u));
                progress = true;
            }
            if (first_missing == kNoSlot) break;
            if (!progress && !reached[first_missing]) {
                extra[entry_].push_back(first_missing);
                flood(first_missing);
            }
        }

        index_.offsets0_.assign(count_ + 1, 0);
        for (std::size_t n = 0; n < count_; ++n)
            index_.offsets0_[n + 1] = index_.offsets0_[n] + degree0_[n] + extra[n].size();
        index_.links0_.resize(index_.offsets0_.back());
        for (std::size_t n = 0; n < count_; ++n) {
            auto dst = index_.links0_.begin() + static_cast<std::ptrdiff_t>(index_.offsets0_[n]);
            const auto own = links(0, static_cast<std::uint32_t>(n));
            dst = std::copy(own.begin(), own.end(), dst);
            std::copy(extra[n].begin(), extra[n].end(), dst);
        }
        links0_.clear();
        links0_.shrink_to_fit();

        index_.upper_.assign(top_level_, {});
        for (std::size_t n = 0; n < count_; ++n) {
            for (std::size_t layer = 1; layer <= level_[n]; ++layer) {
                auto& ul = index_.upper_[layer - 1];
                if (ul.offsets.empty()) ul.offsets.push_back(0);
                const auto& l = upper_links_[upper_slot_[n]][layer - 1];
                ul.nodes.push_back(static_cast<std::uint32_t>(n));
                ul.links.insert(ul.links.end(), l.begin(), l.end());
                ul.offsets.push_back(ul.links.size());
            }
        }
        index_.entry_ = entry_;
    }

    const EmbeddingMatrix& beta_;
    ApproxParams params_;
    RngStream rng_;
    ApproxIndex& index_;
    std::size_t dim_;
    std::size_t count_;
    std::size_t cap0_;
    const float* vectors_ = nullptr;

    std::vector<std::uint32_t> links0_;
    std::vector<std::uint32_t> degree0_;
    std::vector<std::uint8_t> level_;
    std::vector<std::uint32_t> upper_slot_;
    std::vector<std::vector<std::vector<std::uint32_t>>> upper_links_;
    std::uint32_t entry_ = 0;
    std::size_t top_level_ = 0;
    EpochVisited visited_;
    mutable SearchBuffers buffers_;
};

// ---------------------------------------------------------------- ApproxIndex

void ApproxIndex::build_vectors() {
    const auto src = beta_->data();
    vectors_.resize(src.size());
    std::transform(src.begin(), src.end(), vectors_.begin(), [](double v) { return static_cast<float>(v); });
}

ApproxIndex ApproxIndex::build(const EmbeddingMatrix& beta, const ApproxParams& params, RngStream rng) {
    if (params.max_degree < 2) throw InvalidArgument("max_degree must be at least 2");
    if (params.build_beam == 0) throw InvalidArgument("build beam must be positive");
    ApproxIndex index;
    ApproxIndexBuilder(beta, params, rng, index).run();
    return index;
}

std::span<const std::uint32_t> ApproxIndex::neighbors(std::size_t layer, ActionId node) const noexcept {
    if (layer == 0) {
        return {links0_.data() + offsets0_[node], static_cast<std::size_t>(offsets0_[node + 1] - offsets0_[node])};
    }
    if (layer > upper_.size()) return {};
    const UpperLayer& ul = upper_[layer - 1];
    const auto it = std::lower_bound(ul.nodes.begin(), ul.nodes.end(), node);
    if (it == ul.nodes.end() || *it != node) return {};
    const auto pos = static_cast<std::size_t>(it - ul.nodes.begin());
    return {ul.links.data() + ul.offsets[pos], static_cast<std::size_t>(ul.offsets[pos + 1] - ul.offsets[pos])};
}

std::size_t ApproxIndex::reachable_count() const {
    const std::size_t n = beta_->actions();
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack{entry_};
    seen[entry_] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
        const std::uint32_t v = stack.back();
        stack.pop_back();
        for (std::uint32_t w : neighbors(0, v)) {
            if (!seen[w]) {
                seen[w] = 1;
                ++count;
                stack.push_back(w);
            }
        }
    }
    return count;
}

Slate ApproxIndex::query(std::span<const double> h, std::size_t k, std::size_t beam) const {
    const std::size_t count = beta_->actions();
    const std::size_t dim = beta_->dim();
    if (k == 0 || k > count)
        throw InvalidArgument("K must be in [1, P]; got K=" + std::to_string(k) + " with P=" + std::to_string(count));
    if (h.size() != dim) throw ConfigError("query length does not match embedding dimension");

    // Per-thread scratch: after the first queries a search allocates only
    // its result slate, whatever the catalog size.
    struct QueryScratch {
        std::vector<float> q;
        HashVisited visited;
        SearchBuffers buffers;
        std::vector<Candidate> entries, found;
    };
    thread_local QueryScratch scratch;
    auto& q = scratch.q;
    q.resize(dim);
    std::transform(h.begin(), h.end(), q.begin(), [](double v) { return static_cast<float>(v); });
    auto& entries = scratch.entries;
    auto& found = scratch.found;
    entries.assign(1, Candidate{dot_f32(q.data(), vectors_.data() + static_cast<std::size_t>(entry_) * dim, dim),
                                entry_});
    for (std::size_t layer = upper_.size(); layer >= 1; --layer) {
        scratch.visited.clear();
        beam_search(q.data(), vectors_.data(), dim, entries, 1, [&](std::uint32_t n) { return neighbors(layer, n); },
                    scratch.visited, scratch.buffers, found);
        entries.swap(found);
    }
    scratch.visited.clear();
    beam_search(q.data(), vectors_.data(), dim, entries, std::max(beam, k),
                [&](std::uint32_t n) { return neighbors(0, n); }, scratch.visited, scratch.buffers, found);

    // Re-rank the candidates with exact double-precision scores.
    struct Exact {
        double score;
        ActionId id;
    };
    std::vector<Exact> ranked(found.size());
    for (std::size_t i = 0; i < found.size(); ++i) ranked[i] = {beta_->score(h, found[i].id), found[i].id};
    const std::size_t take = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                      [](const Exact& a, const Exact& b) { return a.score > b.score || (a.score == b.score && a.id < b.id); });
    std::vector<ActionId> items(take);
    for (std::size_t i = 0; i < take; ++i) items[i] = ranked[i].id;
    return Slate::unchecked(std::move(items));
}

void ApproxIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open index file for writing", path.string());
    out.write("SLMI", 4);
    detail::write_le<std::uint32_t>(out, kIndexVersion);
    detail::write_le<std::uint64_t>(out, beta_->actions());
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(beta_->dim()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(max_degree_));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer_count()));
    detail::write_le<std::uint64_t>(out, entry_);
    for (std::size_t layer = 0; layer < layer_count(); ++layer) {
        for (std::size_t n = 0; n < beta_->actions(); ++n) {
            const auto links = neighbors(layer, static_cast<ActionId>(n));
            detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(links.size()));
            for (std::uint32_t id : links) detail::write_le<std::uint64_t>(out, id);
        }
    }
    if (!out) throw IoError("failed writing index file", path.string());
}

ApproxIndex ApproxIndex::load(const std::filesystem::path& path, const EmbeddingMatrix& beta, std::size_t query_beam) try {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index file", path.string());
    detail::expect_magic(in, "SLMI");
    const auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kIndexVersion) throw ParseError("unsupported index version " + std::to_string(version), 0);
    const auto count = detail::read_le<std::uint64_t>(in, "P");
    const auto dim = detail::read_le<std::uint32_t>(in, "L");
    if (count != beta.actions() || dim != beta.dim())
        throw ParseError("index shape " + std::to_string(dim) + "x" + std::to_string(count) +
                             " does not match embeddings " + std::to_string(beta.dim()) + "x" +
                             std::to_string(beta.actions()),
                         0);
    ApproxIndex index;
    index.beta_ = &beta;
    index.max_degree_ = detail::read_le<std::uint32_t>(in, "max_degree");
    const auto layers = detail::read_le<std::uint32_t>(in, "layer count");
    const auto entry = detail::read_le<std::uint64_t>(in, "entry point");
    if (layers == 0 || entry >= count) throw ParseError("corrupt index header", 0);
    index.entry_ = static_cast<ActionId>(entry);
    index.query_beam_ = query_beam == 0 ? 1 : query_beam;
    auto read_links = [&](std::vector<std::uint32_t>& dst) {
        const auto n = detail::read_le<std::uint32_t>(in, "link count");
        for (std::uint32_t i = 0; i < n; ++i) {
            const auto id = detail::read_le<std::uint64_t>(in, "link");
            if (id >= count) throw ParseError("link target out of range", 0);
            dst.push_back(static_cast<std::uint32_t>(id));
        }
        return n;
    };
    index.offsets0_.assign(count + 1, 0);
    for (std::uint64_t n = 0; n < count; ++n) index.offsets0_[n + 1] = index.offsets0_[n] + read_links(index.links0_);
    index.upper_.resize(layers - 1);
    for (std::size_t layer = 1; layer < layers; ++layer) {
        auto& ul = index.upper_[layer - 1];
        ul.offsets.push_back(0);
        std::vector<std::uint32_t> scratch;
        for (std::uint64_t n = 0; n < count; ++n) {
            scratch.clear();
            if (read_links(scratch) == 0 && n != entry) continue;
            ul.nodes.push_back(static_cast<std::uint32_t>(n));
            ul.links.insert(ul.links.end(), scratch.begin(), scratch.end());
            ul.offsets.push_back(ul.links.size());
        }
    }
    index.build_vectors();
    return index;
} catch (const ParseError& e) {
    throw e.with_path(path.string());
}

// ---------------------------------------------------------------- recall

RecallReport measure_recall(const MipsIndex& approx, const MipsIndex& exact, std::span<const LatentVector> queries,
                            std::size_t k) {
    if (queries.empty()) throw InvalidArgument("measure_recall needs at least one query");
    double total = 0.0;
    for (const LatentVector& q : queries) {
        const Slate a = approx.query(q, k);
        const Slate e = exact.query(q, k);
        std::size_t hits = 0;
        for (ActionId id : a)
            if (e.contains(id)) ++hits;
        total += static_cast<double>(hits) / static_cast<double>(k);
    }
    return {k, total / static_cast<double>(queries.size()), queries.size()};
}

}  // namespace slate_forge
