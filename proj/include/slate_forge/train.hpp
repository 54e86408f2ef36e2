#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slate_forge/core.hpp"
#include "slate_forge/data.hpp"
#include "slate_forge/gradients.hpp"
#include "slate_forge/mips.hpp"

namespace slate_forge {

struct Budget {
    enum class Kind { Iterations, WallClock };
    Kind kind = Kind::Iterations;
    std::size_t iterations = 1000;
    double seconds = 0.0;

    static Budget of_iterations(std::size_t n) { return {Kind::Iterations, n, 0.0}; }
    static Budget of_seconds(double s) { return {Kind::WallClock, 0, s}; }
};

/// Which search structure the LGP / LRP samplers query. PL estimators ignore it.
enum class IndexKind { Exact, Approx };

struct TrainConfig {
    EstimatorKind estimator = EstimatorKind::LGP;
    IndexKind index = IndexKind::Exact;
    std::size_t k = 5;
    std::size_t samples = 1;
    double sigma = 0.0;  ///< <= 0 selects 1/L
    double lr = 1e-2;
    std::size_t batch_size = 32;
    Budget budget;
    std::size_t eval_intervals = 10;
    std::uint64_t seed = 0;
    ParamKind param_kind = ParamKind::Linear;
    PlSampler sampler = PlSampler::Sequential;
    /// Train users scored for the train_reward column; 0 disables it.
    std::size_t train_eval_users = 256;
    /// Trials of the gradient-variance probe at each evaluation; 0 disables it.
    std::size_t probe_trials = 0;

    /// Throws InvalidArgument or ConfigError on an inconsistent configuration.
    void validate() const;
};

/// Adam with bias-corrected moments. Minimizes: params -= lr * m_hat / (sqrt(v_hat) + eps).
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Throws InvalidArgument on a size mismatch and TrainingDiverged on a
/// non-finite gradient entry (params are left untouched).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad, double lr);

struct TrainRecord {
    std::size_t interval = 0;
    double seconds = 0.0;       ///< training time excluding evaluation
    std::size_t iteration = 0;
    std::optional<double> train_reward;
    double val_reward = 0.0;
    std::optional<double> grad_variance;
};

struct TrainLog {
    std::vector<TrainRecord> records;

    /// Columns: interval, seconds, iteration, train_reward, val_reward[, grad_variance].
    std::string to_csv() const;
    std::string to_json() const;
    void write_csv(const std::filesystem::path& path) const;
    void write_json(const std::filesystem::path& path) const;
};

struct TrainResult {
    PolicyParams params;
    TrainLog log;
    std::size_t iterations = 0;
    double seconds = 0.0;
};

/// M(X) for every user of the split.
std::vector<LatentVector> mean_embeddings(const EmbeddingMatrix& beta, const SessionSplit& split);

/// Mean slate_reward of decide(beta, h_theta(M(X_u)), K) over `users`
/// (indices into the split); exact search, 0 for an empty user list.
double evaluate_deterministic(const PolicyParams& params, const EmbeddingMatrix& beta, const SessionSplit& split,
                              std::span<const std::size_t> users, std::size_t k);

/// Mini-batch training of theta with the configured estimator. `approx` is
/// required when config.index is Approx. `init` defaults to
/// PolicyParams::initial(config.param_kind, L). Under an Iterations budget the
/// result is bit-reproducible for a fixed seed regardless of thread count.
TrainResult train(const TrainConfig& config, const EmbeddingMatrix& beta, const SessionSplit& split,
                  const UserPartition& partition, const MipsIndex* approx = nullptr,
                  std::optional<PolicyParams> init = std::nullopt);

/// SLPP format: "SLPP", version u32, kind u32 (0 linear, 1 two-layer), L u32,
/// then the flat parameters as float64.
void save_params(const PolicyParams& params, const std::filesystem::path& path);
/// Throws IoError or ParseError.
PolicyParams load_params(const std::filesystem::path& path);

/// Average of the per-context gradients of one batch (the quantity train
/// feeds to Adam, before negation). Exposed for tests.
std::vector<double> batch_gradient(const EstimatorConfig& estimator, const EmbeddingMatrix& beta,
                                   const PolicyParams& params, std::size_t k,
                                   std::span<const LatentVector> x_means, std::span<const ItemSet* const> hidden,
                                   const MipsIndex* index, const RngStream& rng);

}  // namespace slate_forge
