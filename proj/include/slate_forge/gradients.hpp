#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "slate_forge/core.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/policy.hpp"
#include "slate_forge/rng.hpp"

namespace slate_forge {

enum class EstimatorKind { PL_PG, PL_COV, LGP, LRP, PL_RANK, PL_EXACT };

struct EstimatorInfo {
    EstimatorKind kind;
    std::string_view name;
    bool available;
    bool needs_linear_reward;
    bool deterministic;
};

/// Every estimator known to the library, in a fixed order.
std::span<const EstimatorInfo> estimator_registry() noexcept;
const EstimatorInfo& estimator_info(EstimatorKind kind) noexcept;
std::string_view estimator_name(EstimatorKind kind) noexcept;
/// Accepts the registry names ("pl-pg", "pl-cov", "lgp", "lrp", "pl-rank",
/// "pl-exact"). Throws ConfigError otherwise.
EstimatorKind parse_estimator(std::string_view name);

/// Reward r(slate, hidden). Linear rewards carry their per-position weights
/// w_k so that estimators exploiting linearity can use them.
class RewardFn {
public:
    using Fn = std::function<double(const Slate&, const ItemSet&)>;

    /// Arbitrary (treated as non-linear) reward.
    explicit RewardFn(Fn fn);
    /// sum_k w_k 1[a_k in hidden].
    static RewardFn linear(std::vector<double> position_weights);
    /// w_k = 2^-(k-1): the experimental slate reward.
    static RewardFn geometric(std::size_t k);

    double operator()(const Slate& slate, const ItemSet& hidden) const;
    bool is_linear() const noexcept { return !weights_.empty(); }
    std::span<const double> position_weights() const noexcept { return weights_; }

private:
    RewardFn() = default;
    Fn fn_;
    std::vector<double> weights_;
};

struct GradientSample {
    std::vector<double> grad;  ///< over PolicyParams::flat() (or beta for the embedding block)
    EstimatorKind estimator = EstimatorKind::PL_PG;
    std::size_t samples = 0;
    std::optional<double> sigma;
    double mean_reward = 0.0;  ///< average reward of the sampled slates
};

/// d/dh log pi(slate) for the PL policy with scores f = h^T beta. Equals
/// sum_i (beta_{a_i} - E_i[beta]) with E_i the expectation under the i-th
/// conditional categorical.
LatentVector pl_log_prob_grad_h(const EmbeddingMatrix& beta, std::span<const double> scores, const Slate& slate);

/// d/dtheta log pi(slate | x).
std::vector<double> pl_log_prob_grad(const PlackettLuce& pl, std::span<const double> x_mean, const Slate& slate);

enum class PlSampler { Sequential, Gumbel };

GradientSample pl_pg_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                          const RewardFn& reward, std::size_t samples, RngStream& rng,
                          PlSampler sampler = PlSampler::Sequential);

/// Throws InvalidArgument when samples < 2.
GradientSample pl_cov_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                           const RewardFn& reward, std::size_t samples, RngStream& rng,
                           PlSampler sampler = PlSampler::Sequential);

/// Throws InvalidArgument when the reward is not linear over positions or its
/// weights are fewer than K.
GradientSample pl_rank_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                            const RewardFn& reward, std::size_t samples, RngStream& rng);

/// Exhaustive sum over all ordered slates. Throws InstanceTooLarge when
/// P!/(P-K)! exceeds 1e6.
GradientSample exact_pl_grad(const PlackettLuce& pl, std::span<const double> x_mean, const ItemSet& hidden,
                             const RewardFn& reward);

/// (1 / (S sigma)) sum_s r_s eps_s: the latent-space part of the LGP estimate
/// for standard normal draws eps_s. The parameter gradient is its backprop.
LatentVector lgp_latent_grad(std::span<const LatentVector> eps0, std::span<const double> rewards, double sigma);

GradientSample lgp_grad(const LgpPolicy& lgp, std::span<const double> x_mean, const ItemSet& hidden,
                        const RewardFn& reward, std::size_t samples, const MipsIndex& index, RngStream& rng);

/// Throws UnsupportedDistribution when the noise has no log-density gradient.
GradientSample lrp_grad(const LrpPolicy& lrp, std::span<const double> x_mean, const ItemSet& hidden,
                        const RewardFn& reward, std::size_t samples, const MipsIndex& index, RngStream& rng);

/// Score-function PL gradient with beta itself as the parameter:
/// f(a) = M(X)^T beta_a, M(X) the mean of the observed columns, so the
/// gradient flows through both beta_a and M(X). Returns L*P values in the
/// column-major layout of EmbeddingMatrix::data().
GradientSample pl_pg_grad_embeddings(const EmbeddingMatrix& beta, std::span<const ActionId> observed,
                                     const ItemSet& hidden, const RewardFn& reward, std::size_t k,
                                     std::size_t samples, RngStream& rng);

/// Everything an estimator needs for one context.
struct GradientInstance {
    const EmbeddingMatrix* beta = nullptr;
    PolicyParams params;
    std::size_t k = 1;
    LatentVector x_mean;
    ItemSet hidden;
    RewardFn reward = RewardFn::geometric(1);
    const MipsIndex* index = nullptr;  ///< LGP / LRP; exact search when null
};

struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::PL_PG;
    std::size_t samples = 1;
    double sigma = 0.0;                                ///< LGP, and LRP when `noise` is unset
    std::shared_ptr<const NoiseDistribution> noise;   ///< LRP
    PlSampler sampler = PlSampler::Sequential;
};

/// Dispatches to the estimator named by `config.kind`. Throws ConfigError for
/// unavailable estimators.
GradientSample estimate_gradient(const EstimatorConfig& config, const GradientInstance& instance, RngStream& rng);

struct VarianceEstimate {
    double variance = 0.0;      ///< E||G - mean||^2 with the (n-1) normalization
    std::vector<double> mean;
    std::size_t trials = 0;
};

/// Runs `draw` for `trials` independent child streams of `rng` and returns the
/// empirical variance. Trials are spread over the worker pool; the result does
/// not depend on the number of workers.
VarianceEstimate estimate_variance(const std::function<std::vector<double>(RngStream&)>& draw, std::size_t trials,
                                   const RngStream& rng);

/// Throws InvalidArgument when trials < 100.
double estimate_variance(const EstimatorConfig& config, const GradientInstance& instance, std::size_t trials,
                         const RngStream& rng);

}  // namespace slate_forge
