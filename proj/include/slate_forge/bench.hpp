#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slate_forge/data.hpp"
#include "slate_forge/gradients.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/train.hpp"

namespace slate_forge {

/// Desk-scale scenario. With `gaussian_embeddings` the embeddings are drawn
/// i.i.d. standard normal and each user gets `items_per_user` uniformly random
/// interactions (latency studies only); otherwise interactions come from
/// generate_synthetic and embeddings from the SVD of the observed half.
struct Scenario {
    std::string name;
    std::size_t users = 0;
    std::size_t actions = 0;
    std::size_t dim = 0;
    std::size_t latent_true = 8;
    double density = 0.01;
    bool gaussian_embeddings = false;
    std::size_t items_per_user = 20;
    std::uint64_t seed = 0;
};

/// "small" (P=1e3, L=16), "medium" (P=1e5, L=32), "large" (P=1e6, L=32,
/// Gaussian embeddings). Throws ConfigError for other names.
Scenario scenario_preset(std::string_view name);

struct ScenarioData {
    Scenario scenario;
    SessionSplit split;
    UserPartition partition;
    std::shared_ptr<const EmbeddingMatrix> beta;  ///< shared so indexes referencing it survive moves
    std::shared_ptr<const ApproxIndex> approx;    ///< set by prepare_scenario(..., true)
};

ScenarioData prepare_scenario(const Scenario& scenario, bool build_index = false);

/// A labelled training configuration. Labels: "lgp-mips" (LGP over the
/// approximate index), "lgp", "lrp", "pl-pg", "pl-cov", "pl-rank".
struct MethodSpec {
    std::string label;
    TrainConfig config;
};

/// Applies the label's estimator/index to `base`. Throws ConfigError for an unknown label.
MethodSpec method_from_label(std::string_view label, const TrainConfig& base);

struct CurvePoint {
    double x = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;  ///< standard error over seeds (0 for one seed)
    std::size_t n = 0;
};

struct Curve {
    std::string method;
    bool available = true;  ///< false marks an explicit gap
    std::string note;
    std::vector<CurvePoint> points;
};

struct SeedPoint {
    std::string method;
    std::uint64_t seed = 0;
    double x = 0.0;
    double y = 0.0;
};

struct BenchReport {
    std::string scenario;
    std::string x_label;
    std::string y_label;
    std::vector<std::pair<std::string, std::string>> fingerprint;
    std::vector<Curve> curves;
    std::vector<SeedPoint> raw;

    const Curve* curve(std::string_view method) const noexcept;
    /// scenario,method,available,x,mean,stderr,n
    std::string to_csv() const;
    /// scenario,method,seed,x,y (plot-ready long format)
    std::string to_long_csv() const;
    std::string to_json() const;
    /// Writes <stem>.csv, <stem>_long.csv and <stem>.json into `dir`.
    void write(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Aggregates raw per-seed points into mean and standard error per (method, x).
void summarize(BenchReport& report);

/// Validation-reward curves under an equal wall-clock budget, methods run
/// sequentially. Throws InvalidArgument with fewer than two methods.
BenchReport bench_time_budget(const ScenarioData& data, std::span<const MethodSpec> methods, double budget_seconds,
                              std::span<const std::uint64_t> seeds);

/// Training-reward curves against the iteration count.
BenchReport bench_iteration_budget(const ScenarioData& data, std::span<const MethodSpec> methods,
                                   std::size_t iterations, std::span<const std::uint64_t> seeds);

/// Frozen gradient instance: theta at its default initialization and the
/// first validation user (falling back to any user) whose hidden set is non-empty.
GradientInstance frozen_instance(const ScenarioData& data, std::size_t k);

/// Up to `count` such instances over distinct validation users, in partition order.
std::vector<GradientInstance> frozen_contexts(const ScenarioData& data, std::size_t k, std::size_t count);

/// Gradient variance per estimator and slate size with sigma = 1/B. Points
/// hold the seed-averaged variance; raw rows hold each seed's estimate.
BenchReport bench_variance_vs_k(const ScenarioData& data, std::span<const EstimatorKind> estimators,
                                std::span<const std::size_t> ks, std::size_t trials,
                                std::span<const std::uint64_t> seeds);

/// LGP gradient variance against sigma, averaged over `contexts` frozen
/// contexts; the fingerprint carries the least-squares slope of log variance
/// on log sigma ("loglog_slope").
BenchReport bench_sigma_scaling(const ScenarioData& data, std::span<const double> sigmas, std::size_t k,
                                std::size_t trials, std::span<const std::uint64_t> seeds, std::size_t contexts = 32);

/// Slope of the least-squares line through (log x, log y).
double loglog_slope(std::span<const double> x, std::span<const double> y);

struct FixedBetaConfig {
    std::size_t k = 2;
    std::size_t samples = 1;
    double lr = 1e-2;
    std::size_t batch_size = 32;
    std::size_t iterations = 200;
    std::size_t intervals = 10;
    std::size_t trials = 200;      ///< variance-probe trials per probe context
    std::size_t probe_contexts = 4;
    std::uint64_t seed = 0;
};

struct FixedBetaResult {
    BenchReport variance;        ///< methods "learn-theta" and "learn-beta", x = iteration
    BenchReport reward;          ///< validation reward, same grid
    double theta_seconds_per_iteration = 0.0;
    double beta_seconds_per_iteration = 0.0;
};

/// PL-PG with fixed beta (learn theta, theta0 = 0.1 I) against PL-PG
/// learning beta directly (beta0 = sqrt(0.1) beta, so both start from the
/// same scores). Throws InvalidArgument when P > 5000.
FixedBetaResult bench_fixed_beta(const ScenarioData& data, const FixedBetaConfig& config);

struct ComplexityPoint {
    std::size_t actions = 0;
    double index_build_seconds = 0.0;
    double mips_seconds = 0.0;   ///< per LGP iteration over the approximate index
    double exact_seconds = 0.0;  ///< per LGP iteration with exhaustive search
    double mips_recall = 0.0;    ///< recall@K of the approximate index on the timed queries
};

/// Per-iteration LGP latency over Gaussian embeddings for each catalog size.
/// One iteration is one context with S samples of slate selection and the
/// gradient backprop.
std::vector<ComplexityPoint> bench_complexity(std::span<const std::size_t> actions, std::size_t dim, std::size_t k,
                                              std::size_t samples, std::size_t iterations, std::uint64_t seed);

/// Key/value pairs describing the host and build.
std::vector<std::pair<std::string, std::string>> environment_fingerprint();

}  // namespace slate_forge
