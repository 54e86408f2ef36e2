#include "slate_forge/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "json.hpp"

#include "binary_io.hpp"
#include "slate_forge/error.hpp"
#include "slate_forge/parallel.hpp"
#include "slate_forge/policy.hpp"

namespace slate_forge {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file", path.string());
    out << text;
    if (!out) throw IoError("write failed", path.string());
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

// Evenly spaced subsample of at most `cap` entries.
std::vector<std::size_t> spread(std::span<const std::size_t> users, std::size_t cap) {
    if (users.size() <= cap) return {users.begin(), users.end()};
    std::vector<std::size_t> out(cap);
    for (std::size_t i = 0; i < cap; ++i) out[i] = users[i * users.size() / cap];
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be finite and >= 0");
    if (samples == 0) throw InvalidArgument("S must be >= 1");
    if (estimator == EstimatorKind::PL_COV && samples < 2) throw InvalidArgument("PL-COV needs S >= 2");
    if (batch_size == 0) throw InvalidArgument("batch size must be >= 1");
    if (k == 0) throw InvalidArgument("K must be >= 1");
    if (eval_intervals == 0) throw InvalidArgument("eval_intervals must be >= 1");
    if (budget.kind == Budget::Kind::WallClock && !(budget.seconds >= 0.0))
        throw InvalidArgument("wall-clock budget must be >= 0 seconds");
    if (!estimator_info(estimator).available)
        throw ConfigError("estimator '" + std::string(estimator_name(estimator)) + "' is not available");
    const bool latent = estimator == EstimatorKind::LGP || estimator == EstimatorKind::LRP;
    if (index == IndexKind::Approx && !latent)
        throw ConfigError("an approximate index is only supported by the LGP and LRP estimators");
    if (estimator == EstimatorKind::PL_EXACT) throw ConfigError("pl-exact is a test oracle, not a training estimator");
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad, double lr) {
    if (grad.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
        throw InvalidArgument("Adam state, parameters and gradient differ in size");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw TrainingDiverged("non-finite gradient at coordinate " + std::to_string(i) + " on Adam step " +
                                   std::to_string(s.step + 1));
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + s.eps);
    }
}

// ---------------------------------------------------------------- log

std::string TrainLog::to_csv() const {
    const bool probe = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.grad_variance; });
    std::ostringstream out;
    out << "interval,seconds,iteration,train_reward,val_reward" << (probe ? ",grad_variance" : "") << '\n';
    for (const TrainRecord& r : records) {
        out << r.interval << ',' << format_double(r.seconds) << ',' << r.iteration << ','
            << (r.train_reward ? format_double(*r.train_reward) : "") << ',' << format_double(r.val_reward);
        if (probe) out << ',' << (r.grad_variance ? format_double(*r.grad_variance) : "");
        out << '\n';
    }
    return out.str();
}

std::string TrainLog::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const TrainRecord& r : records) {
        nlohmann::json row{{"interval", r.interval}, {"seconds", r.seconds}, {"iteration", r.iteration},
                           {"val_reward", r.val_reward}};
        row["train_reward"] = r.train_reward ? nlohmann::json(*r.train_reward) : nlohmann::json(nullptr);
        if (r.grad_variance) row["grad_variance"] = *r.grad_variance;
        rows.push_back(std::move(row));
    }
    return nlohmann::json{{"records", rows}}.dump(2);
}

void TrainLog::write_csv(const std::filesystem::path& path) const { write_text(path, to_csv()); }
void TrainLog::write_json(const std::filesystem::path& path) const { write_text(path, to_json()); }

// ---------------------------------------------------------------- params IO

void save_params(const PolicyParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write parameter file", path.string());
    out.write("SLPP", 4);
    detail::write_le<std::uint32_t>(out, 1);
    detail::write_le<std::uint32_t>(out, params.kind() == ParamKind::Linear ? 0 : 1);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.dim()));
    for (double v : params.flat()) detail::write_le<double>(out, v);
    if (!out) throw IoError("write failed", path.string());
}

PolicyParams load_params(const std::filesystem::path& path) try {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open parameter file", path.string());
    detail::expect_magic(in, "SLPP");
    if (detail::read_le<std::uint32_t>(in, "version") != 1) throw ParseError("unsupported SLPP version", 0);
    const auto kind = detail::read_le<std::uint32_t>(in, "kind");
    const auto dim = detail::read_le<std::uint32_t>(in, "L");
    if (kind > 1 || dim == 0) throw ParseError("invalid SLPP header", 0);
    std::vector<Matrix> blocks(kind == 0 ? 1 : 2, Matrix(dim, dim));
    for (Matrix& m : blocks)
        for (double& v : m.values) v = detail::read_le<double>(in, "parameters");
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after parameters", 0);
    return kind == 0 ? PolicyParams::linear(blocks[0]) : PolicyParams::two_layer(blocks[0], blocks[1]);
} catch (const ParseError& e) {
    throw e.with_path(path.string());
}

// ---------------------------------------------------------------- evaluation

std::vector<LatentVector> mean_embeddings(const EmbeddingMatrix& beta, const SessionSplit& split) {
    std::vector<LatentVector> out(split.size());
    parallel_for(split.size(), [&](std::size_t i) { out[i] = mean_embedding(beta, split.observed[i].items()); });
    return out;
}

namespace {

double evaluate_means(const PolicyParams& params, const EmbeddingMatrix& beta, const SessionSplit& split,
                      std::span<const LatentVector> means, std::span<const std::size_t> users, std::size_t k) {
    if (users.empty()) return 0.0;
    std::vector<double> rewards(users.size());
    parallel_for(users.size(), [&](std::size_t i) {
        const std::size_t u = users[i];
        const LatentVector h = context_embedding(params, means[u]);
        rewards[i] = slate_reward(decide(beta, h, k), split.hidden[u]);
    });
    return pairwise_sum(rewards) / static_cast<double>(users.size());
}

}  // namespace

double evaluate_deterministic(const PolicyParams& params, const EmbeddingMatrix& beta, const SessionSplit& split,
                              std::span<const std::size_t> users, std::size_t k) {
    if (users.empty()) return 0.0;
    std::vector<LatentVector> means(split.size());
    for (std::size_t u : users) {
        if (u >= split.size()) throw InvalidArgument("evaluation user index outside the split");
        means[u] = mean_embedding(beta, split.observed[u].items());
    }
    return evaluate_means(params, beta, split, means, users, k);
}

// ---------------------------------------------------------------- training

std::vector<double> batch_gradient(const EstimatorConfig& estimator, const EmbeddingMatrix& beta,
                                   const PolicyParams& params, std::size_t k,
                                   std::span<const LatentVector> x_means, std::span<const ItemSet* const> hidden,
                                   const MipsIndex* index, const RngStream& rng) {
    if (x_means.size() != hidden.size() || x_means.empty())
        throw InvalidArgument("batch needs matching, non-empty context and hidden lists");
    const RewardFn reward = RewardFn::geometric(k);
    std::vector<std::vector<double>> grads(x_means.size());
    parallel_for(x_means.size(), [&](std::size_t c) {
        GradientInstance inst{&beta, params, k, x_means[c], *hidden[c], reward, index};
        RngStream stream = rng.split(c);
        grads[c] = estimate_gradient(estimator, inst, stream).grad;
    });
    std::vector<double> total = pairwise_sum(grads);
    const double inv = 1.0 / static_cast<double>(x_means.size());
    for (double& g : total) g *= inv;
    return total;
}

TrainResult train(const TrainConfig& config, const EmbeddingMatrix& beta, const SessionSplit& split,
                  const UserPartition& partition, const MipsIndex* approx, std::optional<PolicyParams> init) {
    config.validate();
    if (config.k > beta.actions()) throw InvalidArgument("K exceeds the number of actions");
    if (partition.train.empty()) throw InvalidArgument("no training users");
    if (config.index == IndexKind::Approx && approx == nullptr)
        throw ConfigError("approximate index requested but none supplied");

    const std::size_t dim = beta.dim();
    PolicyParams params = init ? std::move(*init) : PolicyParams::initial(config.param_kind, dim);
    if (params.dim() != dim) throw ConfigError("initial parameters do not match the embedding dimension");

    EstimatorConfig est;
    est.kind = config.estimator;
    est.samples = config.samples;
    est.sigma = config.sigma > 0.0 ? config.sigma : sigma_inverse_dim(dim);
    est.sampler = config.sampler;
    const ExactIndex exact(beta);
    const MipsIndex* index = config.index == IndexKind::Approx ? approx : &exact;

    const std::vector<LatentVector> means = mean_embeddings(beta, split);
    const std::vector<std::size_t> train_probe = spread(partition.train, config.train_eval_users);
    const std::vector<std::size_t> variance_users = spread(partition.train, 8);
    const RngStream root(config.seed);
    const RngStream batch_root = root.split(0);
    const RngStream probe_root = root.split(1);

    TrainResult result;
    AdamState adam(params.size());
    double train_seconds = 0.0;

    auto record = [&](std::size_t interval, std::size_t iteration) {
        TrainRecord r;
        r.interval = interval;
        r.seconds = train_seconds;
        r.iteration = iteration;
        if (!train_probe.empty()) r.train_reward = evaluate_means(params, beta, split, means, train_probe, config.k);
        r.val_reward = evaluate_means(params, beta, split, means, partition.validation, config.k);
        if (config.probe_trials >= 2) {
            std::vector<double> vars(variance_users.size());
            for (std::size_t i = 0; i < variance_users.size(); ++i) {
                const std::size_t u = variance_users[i];
                GradientInstance inst{&beta, params, config.k, means[u], split.hidden[u],
                                      RewardFn::geometric(config.k), index};
                vars[i] = estimate_variance(
                              [&](RngStream& s) { return estimate_gradient(est, inst, s).grad; },
                              config.probe_trials, probe_root.split(interval * 64 + i))
                              .variance;
            }
            r.grad_variance = pairwise_sum(vars) / static_cast<double>(vars.size());
        }
        result.log.records.push_back(std::move(r));
    };

    const bool by_time = config.budget.kind == Budget::Kind::WallClock;
    const std::size_t intervals = config.eval_intervals;
    std::size_t next_interval = 1;
    auto interval_due = [&](std::size_t iteration) {
        if (by_time) return train_seconds >= config.budget.seconds * static_cast<double>(next_interval) /
                                                  static_cast<double>(intervals);
        return iteration * intervals >= config.budget.iterations * next_interval;
    };

    record(0, 0);
    std::size_t iteration = 0;
    std::vector<LatentVector> batch_means(config.batch_size);
    std::vector<const ItemSet*> batch_hidden(config.batch_size);
    for (;;) {
        if (by_time ? train_seconds >= config.budget.seconds : iteration >= config.budget.iterations) break;
        const auto start = Clock::now();
        RngStream pick = batch_root.split(2 * iteration);
        for (std::size_t c = 0; c < config.batch_size; ++c) {
            const std::size_t u = partition.train[pick.uniform_index(partition.train.size())];
            batch_means[c] = means[u];
            batch_hidden[c] = &split.hidden[u];
        }
        std::vector<double> grad = batch_gradient(est, beta, params, config.k, batch_means, batch_hidden, index,
                                                  batch_root.split(2 * iteration + 1));
        for (double& g : grad) g = -g;  // ascend the expected reward
        adam_step(adam, params.flat(), grad, config.lr);
        ++iteration;
        train_seconds += elapsed(start);
        while (next_interval <= intervals && interval_due(iteration)) {
            record(next_interval, iteration);
            ++next_interval;
        }
    }
    // A wall-clock budget can end between interval marks; close the log at the end.
    while (next_interval <= intervals) {
        record(next_interval, iteration);
        ++next_interval;
    }
    result.params = std::move(params);
    result.iterations = iteration;
    result.seconds = train_seconds;
    return result;
}

}  // namespace slate_forge
