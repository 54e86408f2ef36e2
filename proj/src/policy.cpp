#include "slate_forge/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "slate_forge/error.hpp"

namespace slate_forge {

namespace {

void check_policy_shape(const EmbeddingMatrix& beta, const PolicyParams& params, std::size_t k) {
    if (k == 0 || k > beta.actions())
        throw InvalidArgument("K must be in [1, P]; got K=" + std::to_string(k) + " with P=" +
                              std::to_string(beta.actions()));
    if (params.dim() != beta.dim())
        throw ConfigError("policy parameters have L=" + std::to_string(params.dim()) + ", embeddings have L=" +
                          std::to_string(beta.dim()));
}

// Remaining mass of the un-removed weights; `running` is the incrementally
// updated value, recomputed directly once cancellation could dominate.
double remaining_mass(std::span<const double> w, const std::vector<char>& removed, double running, double initial) {
    if (running > 1e-6 * initial) return running;
    double total = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b)
        if (!removed[b]) total += w[b];
    return total;
}

}  // namespace

PlackettLuce::PlackettLuce(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k)
    : beta_(&beta), params_(std::move(params)), k_(k) {
    check_policy_shape(beta, params_, k);
}

std::vector<double> PlackettLuce::scores(std::span<const double> x_mean) const {
    return beta_->scores(context_embedding(params_, x_mean));
}

double pl_log_prob_scores(std::span<const double> scores, const Slate& slate) {
    const std::size_t p = scores.size();
    std::vector<char> removed(p, 0);
    for (ActionId a : slate) {
        if (a >= p) throw InvalidArgument("slate item " + std::to_string(a) + " outside catalog");
        if (removed[a]) throw InvalidArgument("slate contains duplicate actions");
        removed[a] = 1;
    }
    std::fill(removed.begin(), removed.end(), 0);

    const double shift = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(p);
    double z0 = 0.0;
    for (std::size_t b = 0; b < p; ++b) z0 += (w[b] = std::exp(scores[b] - shift));
    double z = z0;
    double log_prob = 0.0;
    for (ActionId a : slate) {
        z = remaining_mass(w, removed, z, z0);
        log_prob += (scores[a] - shift) - std::log(z);
        removed[a] = 1;
        z -= w[a];
    }
    return log_prob;
}

double pl_log_prob(const PlackettLuce& pl, std::span<const double> x_mean, const Slate& slate) {
    if (slate.size() != pl.k())
        throw InvalidArgument("slate has " + std::to_string(slate.size()) + " items, policy K=" + std::to_string(pl.k()));
    return pl_log_prob_scores(pl.scores(x_mean), slate);
}

Slate pl_sample_sequential_weights(std::span<const double> w, double z0, std::size_t k, RngStream& rng) {
    const std::size_t p = w.size();
    if (k == 0 || k > p) throw InvalidArgument("K must be in [1, P]");
    std::vector<char> removed(p, 0);
    std::vector<ActionId> items;
    items.reserve(k);
    double z = z0;
    for (std::size_t i = 0; i < k; ++i) {
        z = remaining_mass(w, removed, z, z0);
        const double target = rng.uniform() * z;
        double acc = 0.0;
        std::size_t pick = p;
        std::size_t last = p;
        for (std::size_t b = 0; b < p; ++b) {
            if (removed[b]) continue;
            last = b;
            acc += w[b];
            if (acc > target) {
                pick = b;
                break;
            }
        }
        if (pick == p) pick = last;  // rounding left target just above the accumulated mass
        removed[pick] = 1;
        z -= w[pick];
        items.push_back(static_cast<ActionId>(pick));
    }
    return Slate::unchecked(std::move(items));
}

Slate pl_sample_sequential_scores(std::span<const double> scores, std::size_t k, RngStream& rng) {
    if (k == 0 || k > scores.size()) throw InvalidArgument("K must be in [1, P]");
    const double shift = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    double z0 = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b) z0 += (w[b] = std::exp(scores[b] - shift));
    return pl_sample_sequential_weights(w, z0, k, rng);
}

Slate pl_sample_sequential(const PlackettLuce& pl, std::span<const double> x_mean, RngStream& rng) {
    return pl_sample_sequential_scores(pl.scores(x_mean), pl.k(), rng);
}

Slate perturbed_top_k(std::span<const double> scores, std::span<const double> gumbel, std::size_t k) {
    if (gumbel.size() != scores.size()) throw InvalidArgument("noise length differs from score length");
    std::vector<double> perturbed(scores.size());
    for (std::size_t b = 0; b < scores.size(); ++b) perturbed[b] = scores[b] + gumbel[b];
    return top_k(perturbed, k);
}

Slate pl_sample_gumbel_scores(std::span<const double> scores, std::size_t k, RngStream& rng) {
    std::vector<double> perturbed(scores.size());
    for (std::size_t b = 0; b < scores.size(); ++b) perturbed[b] = scores[b] + rng.gumbel();
    return top_k(perturbed, k);
}

Slate pl_sample_gumbel(const PlackettLuce& pl, std::span<const double> x_mean, RngStream& rng) {
    return pl_sample_gumbel_scores(pl.scores(x_mean), pl.k(), rng);
}

double sigma_inverse_dim(std::size_t dim) {
    if (dim == 0) throw InvalidArgument("latent dimension must be positive");
    return 1.0 / static_cast<double>(dim);
}

double sigma_inverse_norm(const EmbeddingMatrix& beta) {
    const double b = beta.mean_norm();
    if (!(b > 0.0)) throw InvalidArgument("mean embedding norm is zero; sigma = 1/B undefined");
    return 1.0 / b;
}

// ---------------------------------------------------------------- LGP / LRP

LgpPolicy::LgpPolicy(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k, double sigma)
    : beta_(&beta), params_(std::move(params)), k_(k), sigma_(sigma) {
    check_policy_shape(beta, params_, k);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive and finite");
}

Slate perturbed_query(const MipsIndex& index, std::span<const double> h, std::span<const double> noise, double scale,
                      std::size_t k) {
    if (noise.size() != h.size()) throw InvalidArgument("noise length differs from latent dimension");
    LatentVector query(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) query[j] = h[j] + scale * noise[j];
    return index.query(query, k);
}

LatentSample lgp_sample(const LgpPolicy& lgp, std::span<const double> x_mean, const MipsIndex& index, RngStream& rng) {
    const LatentVector h = context_embedding(lgp.params(), x_mean);
    LatentVector eps(h.size());
    for (double& e : eps) e = rng.normal();
    Slate slate = perturbed_query(index, h, eps, lgp.sigma(), lgp.k());
    return {std::move(slate), std::move(eps)};
}

LatentVector NoiseDistribution::grad_log_density(std::span<const double>) const {
    throw UnsupportedDistribution("noise distribution does not expose a log-density gradient");
}

GaussianNoise::GaussianNoise(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive and finite");
}

LatentVector GaussianNoise::sample(std::size_t dim, RngStream& rng) const {
    LatentVector eps(dim);
    for (double& e : eps) e = sigma_ * rng.normal();
    return eps;
}

double GaussianNoise::log_density(std::span<const double> eps) const {
    const double n = static_cast<double>(eps.size());
    return -0.5 * dot(eps, eps) / (sigma_ * sigma_) - n * std::log(sigma_) - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

LatentVector GaussianNoise::grad_log_density(std::span<const double> eps) const {
    LatentVector g(eps.size());
    const double inv = 1.0 / (sigma_ * sigma_);
    for (std::size_t j = 0; j < eps.size(); ++j) g[j] = -eps[j] * inv;
    return g;
}

LrpPolicy::LrpPolicy(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k,
                     std::shared_ptr<const NoiseDistribution> noise)
    : beta_(&beta), params_(std::move(params)), k_(k), noise_(std::move(noise)) {
    check_policy_shape(beta, params_, k);
    if (!noise_) throw InvalidArgument("LRP policy needs a noise distribution");
}

LatentSample lrp_sample(const LrpPolicy& lrp, std::span<const double> x_mean, const MipsIndex& index, RngStream& rng) {
    const LatentVector h = context_embedding(lrp.params(), x_mean);
    LatentVector eps = lrp.noise().sample(h.size(), rng);
    if (eps.size() != h.size())
        throw InvalidArgument("noise draw has length " + std::to_string(eps.size()) + ", expected " +
                              std::to_string(h.size()));
    Slate slate = perturbed_query(index, h, eps, 1.0, lrp.k());
    return {std::move(slate), std::move(eps)};
}

}  // namespace slate_forge
