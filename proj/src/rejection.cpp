#include "slate_forge/rejection.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "slate_forge/error.hpp"

namespace slate_forge {

RejectionStats& RejectionStats::operator+=(const RejectionStats& other) noexcept {
    accepted += other.accepted;
    proposed += other.proposed;
    head_hits += other.head_hits;
    tail_hits += other.tail_hits;
    envelope_violations += other.envelope_violations;
    return *this;
}

RejectionSampler::RejectionSampler(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k_env,
                                   const MipsIndex& index, bool strict)
    : beta_(&beta), h_(h.begin(), h.end()), k_env_(k_env), strict_(strict) {
    if (k_env == 0 || k_env > beta.actions())
        throw InvalidArgument("K_env must be in [1, P]; got " + std::to_string(k_env) + " with P=" +
                              std::to_string(beta.actions()));
    if (h.size() != beta.dim()) throw ConfigError("query length does not match embedding dimension");
    exhaustive_head_ = index.exact();
    build_head(index);
}

void RejectionSampler::build_head(const MipsIndex& index) {
    const Slate top = index.query(h_, k_env_);
    head_.assign(top.begin(), top.end());
    std::vector<double> scores(head_.size());
    for (std::size_t i = 0; i < head_.size(); ++i) scores[i] = beta_->score(h_, head_[i]);
    // The envelope is the exact K_env-th score among the returned candidates.
    s_env_ = *std::min_element(scores.begin(), scores.end());
    s_max_ = *std::max_element(scores.begin(), scores.end());
    const double env = std::exp(s_env_ - s_max_);
    head_weight_.resize(head_.size());
    for (std::size_t i = 0; i < head_.size(); ++i)
        head_weight_[i] = std::max(0.0, std::exp(scores[i] - s_max_) - env);
    tail_mass_ = static_cast<double>(beta_->actions()) * env;
    in_head_.assign(beta_->actions(), 0);
    for (ActionId a : head_) in_head_[a] = 1;
}

ActionId RejectionSampler::draw(RngStream& rng, RejectionStats& stats, std::span<const char> excluded) {
    const std::size_t p = beta_->actions();
    if (!excluded.empty() && excluded.size() != p) throw InvalidArgument("exclusion mask must have length P");
    auto is_excluded = [&](ActionId a) { return !excluded.empty() && excluded[a]; };
    for (;;) {
        double head_mass = 0.0;
        for (std::size_t i = 0; i < head_.size(); ++i)
            if (!is_excluded(head_[i])) head_mass += head_weight_[i];
        const double total = head_mass + tail_mass_;
        if (!(total > 0.0)) throw InvalidArgument("no admissible action left to sample");
        ++stats.proposed;
        double u = rng.uniform() * total;
        if (u < head_mass) {
            std::size_t pick = head_.size();
            for (std::size_t i = 0; i < head_.size(); ++i) {
                if (is_excluded(head_[i]) || head_weight_[i] == 0.0) continue;
                pick = i;
                if (u < head_weight_[i]) break;
                u -= head_weight_[i];
            }
            ++stats.accepted;
            ++stats.head_hits;
            return head_[pick];
        }
        const auto q = static_cast<ActionId>(rng.uniform_index(p));
        if (is_excluded(q)) continue;
        const double gap = beta_->score(h_, q) - s_env_;
        if (gap > 1e-12 * std::max(1.0, std::abs(s_env_)) && !in_head_[q]) {
            ++stats.envelope_violations;
            assert(!exhaustive_head_ && "envelope violated with an exact head");
            if (strict_ && !exhaustive_head_) {
                build_head(ExactIndex(*beta_));
                exhaustive_head_ = true;
                continue;
            }
        }
        if (gap >= 0.0 || rng.uniform() < std::exp(gap)) {
            ++stats.accepted;
            ++stats.tail_hits;
            return q;
        }
    }
}

Slate RejectionSampler::draw_slate(std::size_t k, RngStream& rng, RejectionStats& stats) {
    const std::size_t p = beta_->actions();
    if (k == 0 || k > p) throw InvalidArgument("K must be in [1, P]");
    std::vector<char> taken(p, 0);
    std::vector<ActionId> items;
    items.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const ActionId a = draw(rng, stats, taken);
        taken[a] = 1;
        items.push_back(a);
    }
    return Slate::unchecked(std::move(items));
}

std::pair<ActionId, RejectionStats> rejection_sample_categorical(const EmbeddingMatrix& beta, std::span<const double> h,
                                                                 std::size_t k_env, const MipsIndex& index,
                                                                 RngStream& rng, bool strict) {
    RejectionSampler sampler(beta, h, k_env, index, strict);
    RejectionStats stats;
    const ActionId a = sampler.draw(rng, stats);
    return {a, stats};
}

Slate rejection_sample_pl_slate(const EmbeddingMatrix& beta, std::span<const double> h, std::size_t k,
                                std::size_t k_env, const MipsIndex& index, RngStream& rng, RejectionStats* stats,
                                bool strict) {
    if (k == 0 || k > beta.actions()) throw InvalidArgument("K must be in [1, P]");
    RejectionSampler sampler(beta, h, k_env, index, strict);
    RejectionStats local;
    Slate slate = sampler.draw_slate(k, rng, local);
    if (stats) *stats += local;
    return slate;
}

}  // namespace slate_forge
