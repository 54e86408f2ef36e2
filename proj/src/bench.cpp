#include "slate_forge/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "slate_forge/error.hpp"
#include "slate_forge/parallel.hpp"
#include "slate_forge/policy.hpp"

namespace slate_forge {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file", path.string());
    out << text;
    if (!out) throw IoError("write failed", path.string());
}

EmbeddingMatrix gaussian_embeddings(std::size_t dim, std::size_t actions, std::uint64_t seed) {
    std::vector<double> data(dim * actions);
    constexpr std::size_t kBlock = 4096;
    const RngStream root(seed, 11);
    parallel_for((actions + kBlock - 1) / kBlock, [&](std::size_t b) {
        RngStream rng = root.split(b);
        const std::size_t end = std::min(actions, (b + 1) * kBlock) * dim;
        for (std::size_t i = b * kBlock * dim; i < end; ++i) data[i] = rng.normal();
    });
    return EmbeddingMatrix(dim, actions, std::move(data));
}

std::vector<std::pair<std::string, std::string>> scenario_fingerprint(const ScenarioData& data, std::size_t k,
                                                                      std::size_t samples,
                                                                      std::span<const std::uint64_t> seeds) {
    auto fp = environment_fingerprint();
    const Scenario& s = data.scenario;
    std::string seed_list;
    for (std::size_t i = 0; i < seeds.size(); ++i) seed_list += (i ? " " : "") + std::to_string(seeds[i]);
    fp.insert(fp.end(), {{"scenario", s.name},
                         {"U", std::to_string(data.split.size())},
                         {"P", std::to_string(data.beta->actions())},
                         {"L", std::to_string(data.beta->dim())},
                         {"K", std::to_string(k)},
                         {"S", std::to_string(samples)},
                         {"data_seed", std::to_string(s.seed)},
                         {"seeds", seed_list}});
    return fp;
}

double mean_of(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

}  // namespace

std::vector<std::pair<std::string, std::string>> environment_fingerprint() {
    return {
        {"library", "slate_forge 0.1.0"},
        {"compiler", __VERSION__},
#ifdef NDEBUG
        {"build", "release"},
#else
        {"build", "debug"},
#endif
        {"threads", std::to_string(max_threads())},
        {"hardware_threads", std::to_string(std::thread::hardware_concurrency())},
    };
}

// ---------------------------------------------------------------- scenarios

Scenario scenario_preset(std::string_view name) {
    if (name == "small") return {"small", 2000, 1000, 16, 8, 0.02, false, 20, 1};
    if (name == "medium") return {"medium", 4000, 100000, 32, 16, 0.001, false, 20, 2};
    if (name == "large") return {"large", 1000, 1000000, 32, 16, 0.0, true, 20, 3};
    throw ConfigError("unknown scenario '" + std::string(name) + "' (expected small, medium or large)");
}

ScenarioData prepare_scenario(const Scenario& s, bool build_index) {
    ScenarioData out;
    out.scenario = s;
    if (s.gaussian_embeddings) {
        if (s.items_per_user < 2 || s.items_per_user > s.actions)
            throw InvalidArgument("items_per_user must be in [2, P]");
        std::vector<std::vector<ActionId>> rows(s.users);
        RngStream rng(s.seed, 5);
        for (auto& row : rows) {
            while (row.size() < s.items_per_user) {
                const auto a = static_cast<ActionId>(rng.uniform_index(s.actions));
                if (std::find(row.begin(), row.end(), a) == row.end()) row.push_back(a);
            }
        }
        const InteractionDataset ds(s.actions, std::move(rows));
        out.split = split_sessions(ds, 0.5, s.seed);
        out.beta = std::make_shared<const EmbeddingMatrix>(gaussian_embeddings(s.dim, s.actions, s.seed));
    } else {
        const InteractionDataset ds =
            generate_synthetic({s.users, s.actions, s.latent_true, s.density, 3.0, 1.0, s.seed});
        out.split = split_sessions(ds, 0.5, s.seed);
        out.beta = std::make_shared<const EmbeddingMatrix>(
            compute_svd_embeddings(observed_interactions(out.split, s.actions), s.dim, 6, s.seed));
    }
    out.partition = partition_users(out.split, 0.1, s.seed);
    if (build_index)
        out.approx = std::make_shared<const ApproxIndex>(ApproxIndex::build(*out.beta, ApproxParams{}, RngStream(s.seed, 9)));
    return out;
}

MethodSpec method_from_label(std::string_view label, const TrainConfig& base) {
    MethodSpec m{std::string(label), base};
    m.config.index = IndexKind::Exact;
    if (label == "lgp-mips") {
        m.config.estimator = EstimatorKind::LGP;
        m.config.index = IndexKind::Approx;
    } else {
        m.config.estimator = parse_estimator(label);
    }
    if (m.config.estimator == EstimatorKind::PL_COV) m.config.samples = std::max<std::size_t>(m.config.samples, 2);
    return m;
}

// ---------------------------------------------------------------- reports

const Curve* BenchReport::curve(std::string_view method) const noexcept {
    for (const Curve& c : curves)
        if (c.method == method) return &c;
    return nullptr;
}

void summarize(BenchReport& report) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<double, std::vector<double>>>> groups;
    for (const SeedPoint& p : report.raw) {
        auto [it, fresh] = groups.try_emplace(p.method);
        if (fresh) order.push_back(p.method);
        auto& xs = it->second;
        auto slot = std::find_if(xs.begin(), xs.end(), [&](const auto& e) { return e.first == p.x; });
        if (slot == xs.end()) xs.push_back({p.x, {p.y}});
        else slot->second.push_back(p.y);
    }
    for (const std::string& method : order) {
        Curve* existing = nullptr;
        for (Curve& c : report.curves)
            if (c.method == method) existing = &c;
        if (!existing) {
            report.curves.push_back(Curve{method, true, {}, {}});
            existing = &report.curves.back();
        }
        existing->points.clear();
        for (const auto& [x, ys] : groups[method]) {
            const double n = static_cast<double>(ys.size());
            const double mean = mean_of(ys);
            double ss = 0.0;
            for (double y : ys) ss += (y - mean) * (y - mean);
            const double se = ys.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
            existing->points.push_back({x, mean, se, ys.size()});
        }
    }
}

std::string BenchReport::to_csv() const {
    std::ostringstream out;
    out << "scenario,method,available,x,mean,stderr,n\n";
    for (const Curve& c : curves) {
        if (!c.available || c.points.empty()) {
            out << scenario << ',' << c.method << ",0,,,,0\n";
            continue;
        }
        for (const CurvePoint& p : c.points)
            out << scenario << ',' << c.method << ",1," << fmt(p.x) << ',' << fmt(p.mean) << ',' << fmt(p.stderr_)
                << ',' << p.n << '\n';
    }
    return out.str();
}

std::string BenchReport::to_long_csv() const {
    std::ostringstream out;
    out << "scenario,method,seed,x,y\n";
    for (const SeedPoint& p : raw)
        out << scenario << ',' << p.method << ',' << p.seed << ',' << fmt(p.x) << ',' << fmt(p.y) << '\n';
    return out.str();
}

std::string BenchReport::to_json() const {
    using nlohmann::json;
    json fp = json::object();
    for (const auto& [k, v] : fingerprint) fp[k] = v;
    json cs = json::array();
    for (const Curve& c : curves) {
        json pts = json::array();
        for (const CurvePoint& p : c.points)
            pts.push_back({{"x", p.x}, {"mean", p.mean}, {"stderr", p.stderr_}, {"n", p.n}});
        cs.push_back({{"method", c.method}, {"available", c.available}, {"note", c.note}, {"points", pts}});
    }
    return json{{"scenario", scenario}, {"x", x_label}, {"y", y_label}, {"fingerprint", fp}, {"curves", cs}}.dump(2);
}

void BenchReport::write(const std::filesystem::path& dir, const std::string& stem) const {
    std::filesystem::create_directories(dir);
    write_text(dir / (stem + ".csv"), to_csv());
    write_text(dir / (stem + "_long.csv"), to_long_csv());
    write_text(dir / (stem + ".json"), to_json());
}

// ---------------------------------------------------------------- training curves

namespace {

BenchReport run_training(const ScenarioData& data, std::span<const MethodSpec> methods,
                         std::span<const std::uint64_t> seeds, const Budget& budget, bool validation_y) {
    BenchReport report;
    report.scenario = data.scenario.name;
    report.x_label = budget.kind == Budget::Kind::WallClock ? "seconds" : "iteration";
    report.y_label = validation_y ? "val_reward" : "train_reward";
    const TrainConfig& first = methods.front().config;
    report.fingerprint = scenario_fingerprint(data, first.k, first.samples, seeds);
    report.fingerprint.emplace_back("budget", budget.kind == Budget::Kind::WallClock
                                                  ? fmt(budget.seconds) + " s"
                                                  : std::to_string(budget.iterations) + " iterations");
    for (const MethodSpec& m : methods) {
        Curve gap{m.label, true, {}, {}};
        bool ran = false;
        for (std::uint64_t seed : seeds) {
            TrainConfig config = m.config;
            config.seed = seed;
            config.budget = budget;
            if (validation_y) config.train_eval_users = 0;
            TrainResult result;
            try {
                result = train(config, *data.beta, data.split, data.partition, data.approx.get());
            } catch (const ConfigError& e) {
                gap.available = false;
                gap.note = e.what();
                break;
            }
            ran = true;
            for (const TrainRecord& r : result.log.records) {
                const double x = budget.kind == Budget::Kind::WallClock
                                     ? budget.seconds * static_cast<double>(r.interval) /
                                           static_cast<double>(config.eval_intervals)
                                     : static_cast<double>(r.iteration);
                const double y = validation_y ? r.val_reward : r.train_reward.value_or(r.val_reward);
                report.raw.push_back({m.label, seed, x, y});
            }
        }
        if (!ran || !gap.available) {
            gap.available = false;
            report.curves.push_back(gap);
        }
    }
    summarize(report);
    return report;
}

}  // namespace

BenchReport bench_time_budget(const ScenarioData& data, std::span<const MethodSpec> methods, double budget_seconds,
                              std::span<const std::uint64_t> seeds) {
    if (methods.size() < 2) throw InvalidArgument("a time-budget comparison needs at least two methods");
    if (seeds.empty()) throw InvalidArgument("at least one seed is required");
    return run_training(data, methods, seeds, Budget::of_seconds(budget_seconds), true);
}

BenchReport bench_iteration_budget(const ScenarioData& data, std::span<const MethodSpec> methods,
                                   std::size_t iterations, std::span<const std::uint64_t> seeds) {
    if (methods.empty() || seeds.empty()) throw InvalidArgument("need at least one method and one seed");
    return run_training(data, methods, seeds, Budget::of_iterations(iterations), false);
}

// ---------------------------------------------------------------- variance studies

std::vector<GradientInstance> frozen_contexts(const ScenarioData& data, std::size_t k, std::size_t count) {
    const SessionSplit& split = data.split;
    const EmbeddingMatrix& beta = *data.beta;
    std::vector<GradientInstance> out;
    auto take = [&](std::size_t u) {
        out.push_back(GradientInstance{&beta, PolicyParams::initial(ParamKind::Linear, beta.dim()), k,
                                       mean_embedding(beta, split.observed[u].items()), split.hidden[u],
                                       RewardFn::geometric(k), nullptr});
    };
    for (std::size_t u : data.partition.validation)
        if (out.size() < count && !split.hidden[u].empty()) take(u);
    for (std::size_t u = 0; out.empty() && u < split.size(); ++u)
        if (!split.hidden[u].empty()) take(u);
    if (out.empty()) throw InvalidArgument("no user with hidden interactions");
    return out;
}

GradientInstance frozen_instance(const ScenarioData& data, std::size_t k) {
    return std::move(frozen_contexts(data, k, 1).front());
}

BenchReport bench_variance_vs_k(const ScenarioData& data, std::span<const EstimatorKind> estimators,
                                std::span<const std::size_t> ks, std::size_t trials,
                                std::span<const std::uint64_t> seeds) {
    BenchReport report;
    report.scenario = data.scenario.name;
    report.x_label = "K";
    report.y_label = "variance";
    const double sigma = sigma_inverse_norm(*data.beta);
    report.fingerprint = scenario_fingerprint(data, ks.empty() ? 0 : ks.back(), 1, seeds);
    report.fingerprint.emplace_back("sigma", fmt(sigma));
    report.fingerprint.emplace_back("trials", std::to_string(trials));
    for (EstimatorKind kind : estimators) {
        const std::string name(estimator_name(kind));
        if (!estimator_info(kind).available) {
            report.curves.push_back({name, false, "estimator not available", {}});
            continue;
        }
        for (std::size_t k : ks) {
            const GradientInstance inst = frozen_instance(data, k);
            EstimatorConfig config{kind, kind == EstimatorKind::PL_COV ? 2u : 1u, sigma, nullptr,
                                   PlSampler::Sequential};
            for (std::uint64_t seed : seeds) {
                const double v = estimate_variance(config, inst, trials, RngStream(seed, 100 + k));
                report.raw.push_back({name, seed, static_cast<double>(k), v});
            }
        }
    }
    summarize(report);
    return report;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope needs at least two matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("log-log slope needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

BenchReport bench_sigma_scaling(const ScenarioData& data, std::span<const double> sigmas, std::size_t k,
                                std::size_t trials, std::span<const std::uint64_t> seeds, std::size_t contexts) {
    BenchReport report;
    report.scenario = data.scenario.name;
    report.x_label = "sigma";
    report.y_label = "variance";
    report.fingerprint = scenario_fingerprint(data, k, 1, seeds);
    report.fingerprint.emplace_back("trials", std::to_string(trials));
    const std::vector<GradientInstance> insts = frozen_contexts(data, k, contexts);
    report.fingerprint.emplace_back("contexts", std::to_string(insts.size()));
    for (double sigma : sigmas) {
        const EstimatorConfig config{EstimatorKind::LGP, 1, sigma, nullptr, PlSampler::Sequential};
        for (std::uint64_t seed : seeds) {
            std::vector<double> vars(insts.size());
            for (std::size_t i = 0; i < insts.size(); ++i)
                vars[i] = estimate_variance(config, insts[i], trials, RngStream(seed, 200 + i));
            report.raw.push_back({"lgp", seed, sigma, mean_of(vars)});
        }
    }
    summarize(report);
    std::vector<double> xs, ys;
    for (const CurvePoint& p : report.curves.front().points) {
        xs.push_back(p.x);
        ys.push_back(p.mean);
    }
    report.fingerprint.emplace_back("loglog_slope", fmt(loglog_slope(xs, ys)));
    return report;
}

// ---------------------------------------------------------------- fixed beta

FixedBetaResult bench_fixed_beta(const ScenarioData& data, const FixedBetaConfig& cfg) {
    const EmbeddingMatrix& beta = *data.beta;
    const std::size_t p = beta.actions();
    const std::size_t dim = beta.dim();
    if (p > 5000) throw InvalidArgument("learning beta is limited to P <= 5000");
    if (cfg.k == 0 || cfg.k > p || cfg.batch_size == 0 || cfg.intervals == 0 || cfg.trials < 2)
        throw InvalidArgument("invalid fixed-beta configuration");
    const SessionSplit& split = data.split;
    const std::vector<std::size_t>& train_users = data.partition.train;
    if (train_users.empty()) throw InvalidArgument("no training users");

    std::vector<std::size_t> probes;
    for (std::size_t u : data.partition.validation)
        if (!split.hidden[u].empty() && probes.size() < cfg.probe_contexts) probes.push_back(u);
    if (probes.empty()) throw InvalidArgument("no validation user with hidden interactions");

    const RewardFn reward = RewardFn::geometric(cfg.k);
    const RngStream root(cfg.seed);
    const std::array<std::uint64_t, 1> seed_list{cfg.seed};

    FixedBetaResult out;
    for (BenchReport* r : {&out.variance, &out.reward}) {
        r->scenario = data.scenario.name;
        r->x_label = "iteration";
        r->fingerprint = scenario_fingerprint(data, cfg.k, cfg.samples, seed_list);
    }
    out.variance.y_label = "variance";
    out.reward.y_label = "val_reward";

    auto due = [&](std::size_t it, std::size_t interval) {
        return it * cfg.intervals >= cfg.iterations * interval;
    };

    // learn theta: beta fixed, theta0 = 0.1 I
    {
        PolicyParams params = PolicyParams::initial(ParamKind::Linear, dim);
        AdamState adam(params.size());
        const EstimatorConfig est{EstimatorKind::PL_PG, cfg.samples, 0.0, nullptr, PlSampler::Sequential};
        const std::vector<LatentVector> means = mean_embeddings(beta, split);
        auto probe = [&](std::size_t interval, std::size_t it) {
            std::vector<double> vars(probes.size());
            for (std::size_t i = 0; i < probes.size(); ++i) {
                const GradientInstance inst{&beta, params, cfg.k, means[probes[i]], split.hidden[probes[i]], reward,
                                            nullptr};
                vars[i] = estimate_variance([&](RngStream& s) { return estimate_gradient(est, inst, s).grad; },
                                            cfg.trials, root.split(1000 + interval * 64 + i))
                              .variance;
            }
            out.variance.raw.push_back({"learn-theta", cfg.seed, static_cast<double>(it), mean_of(vars)});
            out.reward.raw.push_back({"learn-theta", cfg.seed, static_cast<double>(it),
                                      evaluate_deterministic(params, beta, split, data.partition.validation, cfg.k)});
        };
        double seconds = 0.0;
        std::size_t interval = 0;
        probe(interval++, 0);
        std::vector<LatentVector> batch_means(cfg.batch_size);
        std::vector<const ItemSet*> batch_hidden(cfg.batch_size);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            const auto start = Clock::now();
            RngStream pick = root.split(2 * it);
            for (std::size_t c = 0; c < cfg.batch_size; ++c) {
                const std::size_t u = train_users[pick.uniform_index(train_users.size())];
                batch_means[c] = means[u];
                batch_hidden[c] = &split.hidden[u];
            }
            std::vector<double> grad =
                batch_gradient(est, beta, params, cfg.k, batch_means, batch_hidden, nullptr, root.split(2 * it + 1));
            for (double& g : grad) g = -g;
            adam_step(adam, params.flat(), grad, cfg.lr);
            seconds += seconds_since(start);
            while (interval <= cfg.intervals && due(it + 1, interval)) probe(interval++, it + 1);
        }
        out.theta_seconds_per_iteration = cfg.iterations ? seconds / static_cast<double>(cfg.iterations) : 0.0;
    }

    // learn beta: theta fixed to I, beta0 = sqrt(0.1) beta
    {
        std::vector<double> values(beta.data().begin(), beta.data().end());
        for (double& v : values) v *= std::sqrt(0.1);
        EmbeddingMatrix current(dim, p, values);
        AdamState adam(values.size());
        Matrix eye = Matrix::identity(dim);
        const PolicyParams identity = PolicyParams::linear(eye);
        auto probe = [&](std::size_t interval, std::size_t it) {
            std::vector<double> vars(probes.size());
            for (std::size_t i = 0; i < probes.size(); ++i) {
                const std::size_t u = probes[i];
                vars[i] = estimate_variance(
                              [&](RngStream& s) {
                                  return pl_pg_grad_embeddings(current, split.observed[u].items(), split.hidden[u],
                                                               reward, cfg.k, cfg.samples, s)
                                      .grad;
                              },
                              cfg.trials, root.split(1000 + interval * 64 + i))
                              .variance;
            }
            out.variance.raw.push_back({"learn-beta", cfg.seed, static_cast<double>(it), mean_of(vars)});
            out.reward.raw.push_back({"learn-beta", cfg.seed, static_cast<double>(it),
                                      evaluate_deterministic(identity, current, split, data.partition.validation,
                                                             cfg.k)});
        };
        double seconds = 0.0;
        std::size_t interval = 0;
        probe(interval++, 0);
        std::vector<std::vector<double>> grads(cfg.batch_size);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            const auto start = Clock::now();
            RngStream pick = root.split(2 * it);
            std::vector<std::size_t> users(cfg.batch_size);
            for (std::size_t& u : users) u = train_users[pick.uniform_index(train_users.size())];
            const RngStream batch_rng = root.split(2 * it + 1);
            parallel_for(cfg.batch_size, [&](std::size_t c) {
                RngStream s = batch_rng.split(c);
                grads[c] = pl_pg_grad_embeddings(current, split.observed[users[c]].items(), split.hidden[users[c]],
                                                 reward, cfg.k, cfg.samples, s)
                               .grad;
            });
            std::vector<double> grad = pairwise_sum(grads);
            const double scale = -1.0 / static_cast<double>(cfg.batch_size);
            for (double& g : grad) g *= scale;
            adam_step(adam, values, grad, cfg.lr);
            current = EmbeddingMatrix(dim, p, values);
            seconds += seconds_since(start);
            while (interval <= cfg.intervals && due(it + 1, interval)) probe(interval++, it + 1);
        }
        out.beta_seconds_per_iteration = cfg.iterations ? seconds / static_cast<double>(cfg.iterations) : 0.0;
    }

    summarize(out.variance);
    summarize(out.reward);
    for (BenchReport* r : {&out.variance, &out.reward}) {
        r->fingerprint.emplace_back("theta_seconds_per_iteration", fmt(out.theta_seconds_per_iteration));
        r->fingerprint.emplace_back("beta_seconds_per_iteration", fmt(out.beta_seconds_per_iteration));
    }
    return out;
}

// ---------------------------------------------------------------- complexity

std::vector<ComplexityPoint> bench_complexity(std::span<const std::size_t> actions, std::size_t dim, std::size_t k,
                                              std::size_t samples, std::size_t iterations, std::uint64_t seed) {
    if (iterations == 0 || samples == 0) throw InvalidArgument("iterations and samples must be positive");
    std::vector<ComplexityPoint> out;
    for (std::size_t p : actions) {
        ComplexityPoint point;
        point.actions = p;
        const EmbeddingMatrix beta = gaussian_embeddings(dim, p, seed + p);
        auto start = Clock::now();
        const ApproxIndex approx = ApproxIndex::build(beta, ApproxParams{}, RngStream(seed, 9));
        point.index_build_seconds = seconds_since(start);
        const ExactIndex exact(beta);
        const LgpPolicy lgp(beta, PolicyParams::initial(ParamKind::Linear, dim), k, sigma_inverse_dim(dim));
        const RewardFn reward = RewardFn::geometric(k);

        RngStream ctx(seed, 21);
        std::vector<LatentVector> contexts(iterations, LatentVector(dim));
        std::vector<ItemSet> hidden(iterations);
        for (std::size_t i = 0; i < iterations; ++i) {
            for (double& v : contexts[i]) v = 10.0 * ctx.normal();
            std::vector<ActionId> items;
            while (items.size() < std::min<std::size_t>(10, p)) {
                const auto a = static_cast<ActionId>(ctx.uniform_index(p));
                if (std::find(items.begin(), items.end(), a) == items.end()) items.push_back(a);
            }
            hidden[i] = ItemSet(std::move(items));
        }
        auto time_path = [&](const MipsIndex& index) {
            RngStream rng(seed, 31);
            const auto t0 = Clock::now();
            for (std::size_t i = 0; i < iterations; ++i)
                (void)lgp_grad(lgp, contexts[i], hidden[i], reward, samples, index, rng);
            return seconds_since(t0) / static_cast<double>(iterations);
        };
        point.mips_seconds = time_path(approx);
        point.exact_seconds = time_path(exact);
        std::vector<LatentVector> queries;
        for (std::size_t i = 0; i < iterations; ++i) queries.push_back(context_embedding(lgp.params(), contexts[i]));
        point.mips_recall = measure_recall(approx, exact, queries, k).recall;
        out.push_back(point);
    }
    return out;
}

}  // namespace slate_forge
