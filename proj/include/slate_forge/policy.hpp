#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "slate_forge/core.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/rng.hpp"

namespace slate_forge {

/// Plackett-Luce slate policy with relevance f(a, x) = h_theta(m)^T beta_a.
class PlackettLuce {
public:
    /// Throws InvalidArgument unless 1 <= K <= P, ConfigError on an L mismatch.
    PlackettLuce(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k);

    const EmbeddingMatrix& beta() const noexcept { return *beta_; }
    const PolicyParams& params() const noexcept { return params_; }
    std::size_t k() const noexcept { return k_; }

    /// f(a, x) for every action.
    std::vector<double> scores(std::span<const double> x_mean) const;

private:
    const EmbeddingMatrix* beta_;
    PolicyParams params_;
    std::size_t k_;
};

/// log pi(slate) for the given scores. Throws InvalidArgument on duplicate or
/// out-of-range items.
double pl_log_prob_scores(std::span<const double> scores, const Slate& slate);
double pl_log_prob(const PlackettLuce& pl, std::span<const double> x_mean, const Slate& slate);

/// K sequential categorical draws without replacement, O(KP).
/// `weights` are unnormalized probabilities exp(f - shift) and `total` their sum.
Slate pl_sample_sequential_weights(std::span<const double> weights, double total, std::size_t k, RngStream& rng);
Slate pl_sample_sequential_scores(std::span<const double> scores, std::size_t k, RngStream& rng);
Slate pl_sample_sequential(const PlackettLuce& pl, std::span<const double> x_mean, RngStream& rng);

/// argsort^K of scores + gumbel. `gumbel` is the per-action noise; passing
/// all zeros reproduces top_k.
Slate perturbed_top_k(std::span<const double> scores, std::span<const double> gumbel, std::size_t k);
Slate pl_sample_gumbel_scores(std::span<const double> scores, std::size_t k, RngStream& rng);
Slate pl_sample_gumbel(const PlackettLuce& pl, std::span<const double> x_mean, RngStream& rng);

/// sigma = 1/L.
double sigma_inverse_dim(std::size_t dim);
/// sigma = 1/B with B the mean embedding norm.
double sigma_inverse_norm(const EmbeddingMatrix& beta);

/// Latent Gaussian perturbation policy: argsort^K of (h_theta(m) + sigma eps)^T beta.
class LgpPolicy {
public:
    /// Throws InvalidArgument unless sigma > 0 and 1 <= K <= P.
    LgpPolicy(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k, double sigma);

    const EmbeddingMatrix& beta() const noexcept { return *beta_; }
    const PolicyParams& params() const noexcept { return params_; }
    std::size_t k() const noexcept { return k_; }
    double sigma() const noexcept { return sigma_; }

private:
    const EmbeddingMatrix* beta_;
    PolicyParams params_;
    std::size_t k_;
    double sigma_;
};

struct LatentSample {
    Slate slate;
    LatentVector noise;  ///< eps_0 for LGP (standard normal), the raw draw eps for LRP
};

/// Slate for the perturbed query h + scale * noise.
Slate perturbed_query(const MipsIndex& index, std::span<const double> h, std::span<const double> noise, double scale,
                      std::size_t k);

LatentSample lgp_sample(const LgpPolicy& lgp, std::span<const double> x_mean, const MipsIndex& index, RngStream& rng);

/// Continuous latent noise Q for the LRP policy.
class NoiseDistribution {
public:
    virtual ~NoiseDistribution() = default;
    virtual LatentVector sample(std::size_t dim, RngStream& rng) const = 0;
    virtual double log_density(std::span<const double> eps) const = 0;
    /// Whether grad_log_density is implemented.
    virtual bool differentiable() const noexcept { return false; }
    /// d/d eps of log q(eps). Throws UnsupportedDistribution unless differentiable.
    virtual LatentVector grad_log_density(std::span<const double> eps) const;
};

/// N(0, sigma^2 I).
class GaussianNoise final : public NoiseDistribution {
public:
    /// Throws InvalidArgument unless sigma > 0.
    explicit GaussianNoise(double sigma);
    double sigma() const noexcept { return sigma_; }

    LatentVector sample(std::size_t dim, RngStream& rng) const override;
    double log_density(std::span<const double> eps) const override;
    bool differentiable() const noexcept override { return true; }
    LatentVector grad_log_density(std::span<const double> eps) const override;

private:
    double sigma_;
};

/// Latent random perturbation policy: argsort^K of (h_theta(m) + eps)^T beta, eps ~ Q.
class LrpPolicy {
public:
    LrpPolicy(const EmbeddingMatrix& beta, PolicyParams params, std::size_t k,
              std::shared_ptr<const NoiseDistribution> noise);

    const EmbeddingMatrix& beta() const noexcept { return *beta_; }
    const PolicyParams& params() const noexcept { return params_; }
    std::size_t k() const noexcept { return k_; }
    const NoiseDistribution& noise() const noexcept { return *noise_; }

private:
    const EmbeddingMatrix* beta_;
    PolicyParams params_;
    std::size_t k_;
    std::shared_ptr<const NoiseDistribution> noise_;
};

/// Throws InvalidArgument when the noise draw does not have length L.
LatentSample lrp_sample(const LrpPolicy& lrp, std::span<const double> x_mean, const MipsIndex& index, RngStream& rng);

}  // namespace slate_forge
