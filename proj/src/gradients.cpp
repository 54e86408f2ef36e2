#include "slate_forge/gradients.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "slate_forge/error.hpp"
#include "slate_forge/parallel.hpp"

namespace slate_forge {

// ---------------------------------------------------------------- registry

namespace {

constexpr std::array<EstimatorInfo, 6> kRegistry{{
    {EstimatorKind::PL_PG, "pl-pg", true, false, false},
    {EstimatorKind::PL_COV, "pl-cov", true, false, false},
    {EstimatorKind::LGP, "lgp", true, false, false},
    {EstimatorKind::LRP, "lrp", true, false, false},
    {EstimatorKind::PL_RANK, "pl-rank", true, true, false},
    {EstimatorKind::PL_EXACT, "pl-exact", true, false, true},
}};

}  // namespace

std::span<const EstimatorInfo> estimator_registry() noexcept { return kRegistry; }

const EstimatorInfo& estimator_info(EstimatorKind kind) noexcept {
    for (const auto& info : kRegistry)
        if (info.kind == kind) return info;
    return kRegistry.front();
}

std::string_view estimator_name(EstimatorKind kind) noexcept { return estimator_info(kind).name; }

EstimatorKind parse_estimator(std::string_view name) {
    for (const auto& info : kRegistry)
        if (info.name == name) return info.kind;
    throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- rewards

RewardFn::RewardFn(Fn fn) : fn_(std::move(fn)) {
    if (!fn_) throw InvalidArgument("reward function is empty");
}

RewardFn RewardFn::linear(std::vector<double> position_weights) {
    if (position_weights.empty()) throw InvalidArgument("linear reward needs at least one position weight");
    for (double w : position_weights)
        if (!std::isfinite(w)) throw InvalidArgument("linear reward weights must be finite");
    RewardFn r;
    r.weights_ = std::move(position_weights);
    return r;
}

RewardFn RewardFn::geometric(std::size_t k) {
    std::vector<double> w(std::max<std::size_t>(k, 1));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::ldexp(1.0, -static_cast<int>(i));
    return linear(std::move(w));
}

double RewardFn::operator()(const Slate& slate, const ItemSet& hidden) const {
    if (fn_) return fn_(slate, hidden);
    double r = 0.0;
    const std::size_t n = std::min(slate.size(), weights_.size());
    for (std::size_t i = 0; i < n; ++i)
        if (hidden.contains(slate[i])) r += weights_[i];
    return r;
}

// ---------------------------------------------------------------- PL helpers

namespace {

// Softmax state over all actions for one context: shifted weights
// e_b = exp(f_b - max f), their sum and the weighted embedding sum
// W = sum_b e_b beta_b (computed lazily, it costs O(PL)).
struct PlSoftmax {
    const EmbeddingMatrix* beta;
    std::vector<double> e;
    double z0 = 0.0;
    LatentVector w0;

    PlSoftmax(const EmbeddingMatrix& b, std::span<const double> scores) : beta(&b), e(scores.size()) {
        const double shift = *std::max_element(scores.begin(), scores.end());
        for (std::size_t a = 0; a < e.size(); ++a) z0 += (e[a] = std::exp(scores[a] - shift));
    }

    const LatentVector& weighted_sum() {
        if (w0.empty()) {
            w0.assign(beta->dim(), 0.0);
            for (std::size_t a = 0; a < e.size(); ++a) {
                if (e[a] == 0.0) continue;
                const auto col = beta->column(static_cast<ActionId>(a));
                for (std::size_t j = 0; j < w0.size(); ++j) w0[j] += e[a] * col[j];
            }
        }
        return w0;
    }
};

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += alpha * x[j];
}

// Walks the conditional normalizers of `slate`: calls step(i, z, w) with the
// mass z and weighted sum w of the actions still available before position i.
// Running subtraction is replaced by a direct sum once the remaining mass falls
// below 1e-6 of the total, where cancellation would dominate.
template <class Step>
void walk_normalizers(PlSoftmax& sm, const Slate& slate, Step&& step) {
    const EmbeddingMatrix& beta = *sm.beta;
    double z = sm.z0;
    LatentVector w = sm.weighted_sum();
    std::vector<ActionId> taken;
    taken.reserve(slate.size());
    for (std::size_t i = 0; i < slate.size(); ++i) {
        if (z <= 1e-6 * sm.z0) {
            z = 0.0;
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t a = 0; a < sm.e.size(); ++a) {
                if (std::find(taken.begin(), taken.end(), static_cast<ActionId>(a)) != taken.end()) continue;
                z += sm.e[a];
                axpy(sm.e[a], beta.column(static_cast<ActionId>(a)), w);
            }
        }
        step(i, z, std::span<const double>(w));
        const ActionId a = slate[i];
        z -= sm.e[a];
        axpy(-sm.e[a], beta.column(a), w);
        taken.push_back(a);
    }
}

LatentVector log_prob_grad_h(PlSoftmax& sm, const Slate& slate) {
    LatentVector g(sm.beta->dim(), 0.0);
    walk_normalizers(sm, slate, [&](std::size_t i, double z, std::span<const double> w) {
        axpy(1.0, sm.beta->column(slate[i]), g);
        axpy(-1.0 / z, w, g);
    });
    return g;
}

Slate draw_pl(PlSoftmax& sm, std::span<const double> scores, std::size_t k, PlSampler sampler, RngStream& rng) {
    if (sampler == PlSampler::Gumbel) return pl_sample_gumbel_scores(scores, k, rng);
    return pl_sample_sequential_weights(sm.e, sm.z0, k, rng);
}

void check_samples(std::size_t samples, std::size_t minimum) {
    if (samples < minimum)
        throw InvalidArgument("estimator needs S >= " + std::to_string(minimum) + ", got " + std::to_string(samples));
}

void check_finite(const std::vector<double>& g) {
    for (double v : g)
        if (!std::isfinite(v)) throw TrainingDiverged("gradient estimate has non-finite entries");
}

}  // namespace

LatentVector pl_log_prob_grad_h(const EmbeddingMatrix& beta, std::span<const double> scores, const Slate& slate) {
    if (scores.size() != beta.actions()) throw InvalidArgument("score vector length differs from P");
    for (ActionId a : slate)
        if (a >= beta.actions()) throw InvalidArgument("slate item outside catalog");
    PlSoftmax sm(beta, scores);
    return log_prob_grad_h(sm, slate);
}

std::vector<double> pl_log_prob_grad(const PlackettLuce& pl, std::span<const double> x_mean, const Slate& slate) {
    const auto scores = pl.scores(x_mean);
    return backprop_embedding(pl.params(), x_mean, pl_log_prob_grad_h(pl.beta(), scores, slate));
}

GradientSample pl_pg_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                          const RewardFn& reward, std::size_t samples, RngStream& rng, PlSampler sampler) {
    check_samples(samples, 1);
    const auto scores = pl.scores(x_mean);
    PlSoftmax sm(pl.beta(), scores);
    LatentVector g(pl.beta().dim(), 0.0);
    double reward_sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Slate slate = draw_pl(sm, scores, pl.k(), sampler, rng);
        const double r = reward(slate, hidden);
        reward_sum += r;
        if (r != 0.0) axpy(r, log_prob_grad_h(sm, slate), g);
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (double& v : g) v *= inv;
    GradientSample out{backprop_embedding(pl.params(), x_mean, g), EstimatorKind::PL_PG, samples, std::nullopt,
                       reward_sum * inv};
    check_finite(out.grad);
    return out;
}

GradientSample pl_cov_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                           const RewardFn& reward, std::size_t samples, RngStream& rng, PlSampler sampler) {
    check_samples(samples, 2);
    const auto scores = pl.scores(x_mean);
    PlSoftmax sm(pl.beta(), scores);
    const std::size_t dim = pl.beta().dim();
    std::vector<double> rewards(samples);
    std::vector<LatentVector> feature(samples, LatentVector(dim, 0.0));
    for (std::size_t s = 0; s < samples; ++s) {
        const Slate slate = draw_pl(sm, scores, pl.k(), sampler, rng);
        rewards[s] = reward(slate, hidden);
        for (ActionId a : slate) axpy(1.0, pl.beta().column(a), feature[s]);
    }
    const double n = static_cast<double>(samples);
    double r_mean = 0.0;
    for (double r : rewards) r_mean += r;
    r_mean /= n;
    LatentVector f_mean(dim, 0.0);
    for (const auto& f : feature) axpy(1.0 / n, f, f_mean);
    LatentVector g(dim, 0.0);
    for (std::size_t s = 0; s < samples; ++s) {
        const double dr = rewards[s] - r_mean;
        if (dr == 0.0) continue;
        for (std::size_t j = 0; j < dim; ++j) g[j] += dr * (feature[s][j] - f_mean[j]);
    }
    for (double& v : g) v /= (n - 1.0);
    GradientSample out{backprop_embedding(pl.params(), x_mean, g), EstimatorKind::PL_COV, samples, std::nullopt,
                       r_mean};
    check_finite(out.grad);
    return out;
}

GradientSample pl_rank_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                            const RewardFn& reward, std::size_t samples, RngStream& rng) {
    check_samples(samples, 1);
    if (!reward.is_linear()) throw InvalidArgument("pl-rank requires a reward that is linear over slate positions");
    const std::size_t k = pl.k();
    if (reward.position_weights().size() < k) throw InvalidArgument("linear reward has fewer weights than K");
    const auto weights = reward.position_weights().first(k);
    const EmbeddingMatrix& beta = pl.beta();
    const std::size_t dim = beta.dim();
    const auto scores = pl.scores(x_mean);
    PlSoftmax sm(beta, scores);

    // Sums over relevant actions (rho_d = 1) of e_d beta_d and e_d.
    LatentVector w_rel(dim, 0.0);
    double z_rel = 0.0;
    for (ActionId d : hidden) {
        if (d >= beta.actions()) continue;
        z_rel += sm.e[d];
        axpy(sm.e[d], beta.column(d), w_rel);
    }
    const LatentVector& w_all = sm.weighted_sum();

    LatentVector g(dim, 0.0);
    std::vector<double> z(k), suffix(k + 1, 0.0), rho(k);
    double reward_sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Slate slate = pl_sample_sequential_weights(sm.e, sm.z0, k, rng);
        walk_normalizers(sm, slate, [&](std::size_t i, double zi, std::span<const double>) { z[i] = zi; });
        for (std::size_t i = 0; i < k; ++i) rho[i] = hidden.contains(slate[i]) ? 1.0 : 0.0;
        for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] + weights[i] * rho[i];
        reward_sum += suffix[0];

        // Actions outside the slate: coef(d) = e_d (rho_d A - C) with
        // A = sum_i w_i / z_i and C = sum_i R_i / z_i over all K positions.
        double big_a = 0.0, big_c = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            big_a += weights[i] / z[i];
            big_c += suffix[i] / z[i];
        }
        LatentVector rest_all(w_all), rest_rel(w_rel);
        for (ActionId a : slate) {
            axpy(-sm.e[a], beta.column(a), rest_all);
            if (hidden.contains(a)) axpy(-sm.e[a], beta.column(a), rest_rel);
        }
        axpy(big_a, rest_rel, g);
        axpy(-big_c, rest_all, g);

        // Actions in the slate at position r: the reward collected after r plus
        // the expected direct reward minus the baseline at every step up to r.
        for (std::size_t r = 0; r < k; ++r) {
            const ActionId d = slate[r];
            double coef = suffix[r + 1];
            for (std::size_t i = 0; i <= r; ++i) coef += sm.e[d] / z[i] * (weights[i] * rho[r] - suffix[i]);
            axpy(coef, beta.column(d), g);
        }
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (double& v : g) v *= inv;
    GradientSample out{backprop_embedding(pl.params(), x_mean, g), EstimatorKind::PL_RANK, samples, std::nullopt,
                       reward_sum * inv};
    check_finite(out.grad);
    return out;
}

GradientSample exact_pl_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                             const RewardFn& reward) {
    const std::size_t p = pl.beta().actions();
    const std::size_t k = pl.k();
    double count = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        count *= static_cast<double>(p - i);
        if (count > 1e6)
            throw InstanceTooLarge("exhaustive PL gradient refused: more than 1e6 ordered slates (P=" +
                                   std::to_string(p) + ", K=" + std::to_string(k) + ")");
    }
    const EmbeddingMatrix& beta = pl.beta();
    const std::size_t dim = beta.dim();
    const auto scores = pl.scores(x_mean);
    PlSoftmax sm(beta, scores);

    LatentVector g(dim, 0.0);
    double expected_reward = 0.0;
    std::vector<ActionId> prefix;
    std::vector<char> used(p, 0);
    // Depth-first over prefixes carrying probability, score gradient, and the
    // remaining mass / weighted sum (recomputed directly: instances are tiny).
    auto recurse = [&](auto&& self, double prob, const LatentVector& score_grad) -> void {
        if (prefix.size() == k) {
            const double r = reward(Slate::unchecked(prefix), hidden);
            expected_reward += prob * r;
            axpy(prob * r, score_grad, g);
            return;
        }
        double z = 0.0;
        LatentVector w(dim, 0.0);
        for (std::size_t a = 0; a < p; ++a) {
            if (used[a]) continue;
            z += sm.e[a];
            axpy(sm.e[a], beta.column(static_cast<ActionId>(a)), w);
        }
        if (z <= 0.0) return;
        for (std::size_t a = 0; a < p; ++a) {
            if (used[a] || sm.e[a] == 0.0) continue;
            LatentVector next(score_grad);
            axpy(1.0, beta.column(static_cast<ActionId>(a)), next);
            axpy(-1.0 / z, w, next);
            used[a] = 1;
            prefix.push_back(static_cast<ActionId>(a));
            self(self, prob * sm.e[a] / z, next);
            prefix.pop_back();
            used[a] = 0;
        }
    };
    recurse(recurse, 1.0, LatentVector(dim, 0.0));
    return {backprop_embedding(pl.params(), x_mean, g), EstimatorKind::PL_EXACT, 0, std::nullopt, expected_reward};
}

// ---------------------------------------------------------------- LGP / LRP

LatentVector lgp_latent_grad(std::span<const LatentVector> eps0, std::span<const double> rewards, double sigma) {
    if (eps0.size() != rewards.size() || eps0.empty()) throw InvalidArgument("need one reward per noise draw");
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    LatentVector g(eps0.front().size(), 0.0);
    for (std::size_t s = 0; s < eps0.size(); ++s) axpy(rewards[s], eps0[s], g);
    const double scale = 1.0 / (static_cast<double>(eps0.size()) * sigma);
    for (double& v : g) v *= scale;
    return g;
}

GradientSample lgp_grad(const LgpPolicy& lgp, std::span<const double> x_mean, const ItemSet& hidden,
                        const RewardFn& reward, std::size_t samples, const MipsIndex& index, RngStream& rng) {
    check_samples(samples, 1);
    if (index.embeddings().dim() != lgp.beta().dim()) throw ConfigError("index dimension differs from policy");
    const LatentVector h = context_embedding(lgp.params(), x_mean);
    const std::size_t dim = h.size();
    LatentVector g(dim, 0.0), eps(dim), query(dim);
    double reward_sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t j = 0; j < dim; ++j) {
            eps[j] = rng.normal();
            query[j] = h[j] + lgp.sigma() * eps[j];
        }
        const double r = reward(index.query(query, lgp.k()), hidden);
        reward_sum += r;
        axpy(r, eps, g);
    }
    const double scale = 1.0 / (static_cast<double>(samples) * lgp.sigma());
    for (double& v : g) v *= scale;
    GradientSample out{backprop_embedding(lgp.params(), x_mean, g), EstimatorKind::LGP, samples, lgp.sigma(),
                       reward_sum / static_cast<double>(samples)};
    check_finite(out.grad);
    return out;
}

GradientSample lrp_grad(const LrpPolicy& lrp, std::span<const double> x_mean, const ItemSet& hidden,
                        const RewardFn& reward, std::size_t samples, const MipsIndex& index, RngStream& rng) {
    check_samples(samples, 1);
    if (!lrp.noise().differentiable())
        throw UnsupportedDistribution("lrp gradient needs a noise distribution with a differentiable log-density");
    const LatentVector h = context_embedding(lrp.params(), x_mean);
    const std::size_t dim = h.size();
    LatentVector g(dim, 0.0), query(dim);
    double reward_sum = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const LatentVector eps = lrp.noise().sample(dim, rng);
        if (eps.size() != dim) throw InvalidArgument("noise draw length differs from L");
        for (std::size_t j = 0; j < dim; ++j) query[j] = h[j] + eps[j];
        const double r = reward(index.query(query, lrp.k()), hidden);
        reward_sum += r;
        if (r == 0.0) continue;
        // log q_theta(h) = log q0(h - h_theta), so d/dh_theta = -grad log q0(eps).
        axpy(-r, lrp.noise().grad_log_density(eps), g);
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (double& v : g) v *= inv;
    std::optional<double> sigma;
    if (const auto* gauss = dynamic_cast<const GaussianNoise*>(&lrp.noise())) sigma = gauss->sigma();
    GradientSample out{backprop_embedding(lrp.params(), x_mean, g), EstimatorKind::LRP, samples, sigma,
                       reward_sum * inv};
    check_finite(out.grad);
    return out;
}

// ---------------------------------------------------------------- learned beta

GradientSample pl_pg_grad_embeddings(const EmbeddingMatrix& beta, std::span<const ActionId> observed,
                                     const ItemSet& hidden, const RewardFn& reward, std::size_t k,
                                     std::size_t samples, RngStream& rng) {
    check_samples(samples, 1);
    const std::size_t dim = beta.dim();
    const std::size_t p = beta.actions();
    if (k == 0 || k > p) throw InvalidArgument("K must be in [1, P]");
    const LatentVector m = mean_embedding(beta, observed);
    const auto scores = beta.scores(m);
    PlSoftmax sm(beta, scores);

    std::vector<double> grad(dim * p, 0.0);
    std::vector<double> coef(p);
    double reward_sum = 0.0;
    const double inv_observed = 1.0 / static_cast<double>(observed.size());
    std::vector<double> inv_z(k);
    for (std::size_t s = 0; s < samples; ++s) {
        const Slate slate = pl_sample_sequential_weights(sm.e, sm.z0, k, rng);
        const double r = reward(slate, hidden);
        reward_sum += r;
        if (r == 0.0) continue;
        walk_normalizers(sm, slate, [&](std::size_t i, double z, std::span<const double>) { inv_z[i] = 1.0 / z; });
        // c_b = sum_i (1[b = a_i] - pi_i(b)), pi_i(b) = e_b / z_i while b is available.
        double tail = 0.0;
        for (double v : inv_z) tail += v;
        for (std::size_t b = 0; b < p; ++b) coef[b] = -sm.e[b] * tail;
        double prefix = 0.0;
        for (std::size_t r_pos = 0; r_pos < k; ++r_pos) {
            prefix += inv_z[r_pos];
            const ActionId a = slate[r_pos];
            coef[a] = 1.0 - sm.e[a] * prefix;
        }
        LatentVector g_h(dim, 0.0);
        for (std::size_t b = 0; b < p; ++b) {
            const auto col = beta.column(static_cast<ActionId>(b));
            axpy(coef[b], col, g_h);
            axpy(r * coef[b], m, std::span<double>(grad.data() + b * dim, dim));
        }
        for (ActionId a : observed) axpy(r * inv_observed, g_h, std::span<double>(grad.data() + a * dim, dim));
    }
    const double inv = 1.0 / static_cast<double>(samples);
    for (double& v : grad) v *= inv;
    GradientSample out{std::move(grad), EstimatorKind::PL_PG, samples, std::nullopt, reward_sum * inv};
    check_finite(out.grad);
    return out;
}

// ---------------------------------------------------------------- dispatch

GradientSample estimate_gradient(const EstimatorConfig& config, const GradientInstance& instance, RngStream& rng) {
    if (instance.beta == nullptr) throw ConfigError("gradient instance has no embedding matrix");
    const EstimatorInfo& info = estimator_info(config.kind);
    if (!info.available) throw ConfigError("estimator '" + std::string(info.name) + "' is not available");
    const EmbeddingMatrix& beta = *instance.beta;
    switch (config.kind) {
        case EstimatorKind::PL_PG:
        case EstimatorKind::PL_COV:
        case EstimatorKind::PL_RANK:
        case EstimatorKind::PL_EXACT: {
            const PlackettLuce pl(beta, instance.params, instance.k);
            if (config.kind == EstimatorKind::PL_PG)
                return pl_pg_grad(pl, instance.x_mean, instance.hidden, instance.reward, config.samples, rng,
                                  config.sampler);
            if (config.kind == EstimatorKind::PL_COV)
                return pl_cov_grad(pl, instance.x_mean, instance.hidden, instance.reward, config.samples, rng,
                                   config.sampler);
            if (config.kind == EstimatorKind::PL_RANK)
                return pl_rank_grad(pl, instance.x_mean, instance.hidden, instance.reward, config.samples, rng);
            return exact_pl_grad(pl, instance.x_mean, instance.hidden, instance.reward);
        }
        case EstimatorKind::LGP:
        case EstimatorKind::LRP: {
            const ExactIndex fallback(beta);
            const MipsIndex& index = instance.index ? *instance.index : static_cast<const MipsIndex&>(fallback);
            if (config.kind == EstimatorKind::LGP) {
                const LgpPolicy lgp(beta, instance.params, instance.k, config.sigma);
                return lgp_grad(lgp, instance.x_mean, instance.hidden, instance.reward, config.samples, index, rng);
            }
            auto noise = config.noise ? config.noise : std::make_shared<const GaussianNoise>(config.sigma);
            const LrpPolicy lrp(beta, instance.params, instance.k, std::move(noise));
            return lrp_grad(lrp, instance.x_mean, instance.hidden, instance.reward, config.samples, index, rng);
        }
    }
    throw ConfigError("unhandled estimator");
}

// ---------------------------------------------------------------- variance

namespace {

struct Moments {
    double n = 0.0;
    std::vector<double> mean;
    double m2 = 0.0;  // sum of squared deviations from the mean
};

void add_observation(Moments& acc, const std::vector<double>& x) {
    if (acc.mean.empty()) acc.mean.assign(x.size(), 0.0);
    if (x.size() != acc.mean.size()) throw InvalidArgument("gradient draws have inconsistent lengths");
    acc.n += 1.0;
    double m2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double delta = x[j] - acc.mean[j];
        acc.mean[j] += delta / acc.n;
        m2 += delta * (x[j] - acc.mean[j]);
    }
    acc.m2 += m2;
}

Moments merge(const Moments& a, const Moments& b) {
    if (a.n == 0.0) return b;
    if (b.n == 0.0) return a;
    Moments out;
    out.n = a.n + b.n;
    out.mean.resize(a.mean.size());
    double delta_sq = 0.0;
    for (std::size_t j = 0; j < a.mean.size(); ++j) {
        const double delta = b.mean[j] - a.mean[j];
        delta_sq += delta * delta;
        out.mean[j] = a.mean[j] + delta * b.n / out.n;
    }
    out.m2 = a.m2 + b.m2 + delta_sq * a.n * b.n / out.n;
    return out;
}

Moments merge_range(std::span<const Moments> parts) {
    if (parts.size() == 1) return parts.front();
    const std::size_t half = parts.size() / 2;
    return merge(merge_range(parts.first(half)), merge_range(parts.subspan(half)));
}

}  // namespace

VarianceEstimate estimate_variance(const std::function<std::vector<double>(RngStream&)>& draw, std::size_t trials,
                                   const RngStream& rng) {
    if (trials < 2) throw InvalidArgument("variance estimation needs at least two trials");
    // Fixed blocks of consecutive trials keep the reduction order independent
    // of the worker count.
    const std::size_t blocks = std::min<std::size_t>(trials, 64);
    std::vector<Moments> parts(blocks);
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t begin = trials * b / blocks;
        const std::size_t end = trials * (b + 1) / blocks;
        for (std::size_t t = begin; t < end; ++t) {
            RngStream stream = rng.split(t);
            add_observation(parts[b], draw(stream));
        }
    });
    const Moments total = merge_range(parts);
    return {total.m2 / (total.n - 1.0), total.mean, trials};
}

double estimate_variance(const EstimatorConfig& config, const GradientInstance& instance, std::size_t trials,
                         const RngStream& rng) {
    if (trials < 100) throw InvalidArgument("variance estimation needs at least 100 trials");
    return estimate_variance([&](RngStream& stream) { return estimate_gradient(config, instance, stream).grad; },
                             trials, rng)
        .variance;
}

}  // namespace slate_forge
