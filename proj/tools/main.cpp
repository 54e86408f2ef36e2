// slate_forge command line: data generation, embeddings, index, training,
// evaluation and benchmarks.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "slate_forge/bench.hpp"
#include "slate_forge/data.hpp"
#include "slate_forge/error.hpp"
#include "slate_forge/gradients.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/parallel.hpp"
#include "slate_forge/policy.hpp"
#include "slate_forge/train.hpp"

namespace fs = std::filesystem;
using namespace slate_forge;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- config file

std::string strip(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// "key = value" lines; '#' starts a comment; values may be double-quoted.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file", path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = strip(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty()) throw ParseError("empty key", line_no);
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

// Appends config-file settings for flags absent from the command line.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    auto it = std::find(args.begin(), args.end(), "--config");
    if (it == args.end() || it + 1 == args.end()) return args;
    const fs::path path = *(it + 1);
    args.erase(it, it + 2);
    for (const auto& [key, value] : read_config(path)) {
        const std::string flag = "--" + key;
        const bool present = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
        if (present) continue;
        if (value == "true") {
            args.push_back(flag);
        } else if (value != "false") {
            args.push_back(flag);
            args.push_back(value);
        }
    }
    return args;
}

// ---------------------------------------------------------------- helpers

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = strip(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const std::string& s : split_list(text)) out.push_back(std::stoull(s));
    if (out.empty()) throw InvalidArgument("seed list is empty");
    return out;
}

double resolve_sigma(const std::string& text, const EmbeddingMatrix& beta) {
    if (text == "auto") return sigma_inverse_dim(beta.dim());
    if (text == "norm") return sigma_inverse_norm(beta);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !(v > 0.0)) throw InvalidArgument("--sigma must be auto, norm or a positive number");
    return v;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file", path.string());
    out << text;
    if (!out) throw IoError("write failed", path.string());
}

// Records an artifact in <out>/manifest.json; keys are sorted so reruns with
// identical inputs produce identical bytes.
void record_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& settings,
                     const std::vector<std::string>& files) {
    const fs::path path = dir / "manifest.json";
    nlohmann::json manifest = nlohmann::json::object();
    if (fs::exists(path)) {
        std::ifstream in(path);
        try {
            manifest = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception&) {
            throw ParseError("manifest is not valid JSON: " + path.string(), 0);
        }
    }
    manifest["tool"] = "slate_forge";
    manifest["version"] = kVersion;
    manifest["commands"][command] = {{"settings", settings}, {"files", files}};
    write_file(path, manifest.dump(2) + "\n");
}

// Setting recorded by an earlier command in the manifest beside `artifact`.
std::string manifest_setting(const fs::path& artifact, const std::string& command, const std::string& key) {
    const fs::path path = artifact.parent_path() / "manifest.json";
    std::ifstream in(path);
    if (!in) return {};
    try {
        const nlohmann::json m = nlohmann::json::parse(in);
        const auto& v = m.at("commands").at(command).at("settings").at(key);
        return v.is_string() ? v.get<std::string>() : std::string{};
    } catch (const nlohmann::json::exception&) {
        return {};
    }
}

std::string require_input(std::string value, const char* flag) {
    if (value.empty()) throw InvalidArgument(std::string(flag) + " is required (not found in a neighbouring manifest)");
    return value;
}

struct DataOptions {
    std::string data;
    std::string embeddings;
    double ratio = 0.5;
    std::uint64_t split_seed = 0;
    double validation = 0.1;
};

void add_data_options(CLI::App* sub, DataOptions& o, bool need_embeddings) {
    sub->add_option("--data", o.data, "interaction CSV (user_id,item_id)")->required();
    auto* emb = sub->add_option("--embeddings", o.embeddings, "SLEB embedding file");
    if (need_embeddings) emb->required();
    sub->add_option("--split-ratio", o.ratio, "observed fraction of each session")->capture_default_str();
    sub->add_option("--split-seed", o.split_seed, "seed of the observed/hidden split and user partition")
        ->capture_default_str();
    sub->add_option("--validation", o.validation, "fraction of users held out for validation")
        ->capture_default_str();
}

struct LoadedData {
    InteractionDataset ds;
    SessionSplit split;
    UserPartition partition;
};

LoadedData load_data(const DataOptions& o, std::optional<std::size_t> actions = std::nullopt) {
    LoadedData d;
    d.ds = load_interactions(o.data, actions);
    d.split = split_sessions(d.ds, o.ratio, o.split_seed);
    if (d.split.dropped > 0)
        std::cerr << "warning: dropped " << d.split.dropped << " users with fewer than two interactions\n";
    d.partition = partition_users(d.split, o.validation, o.split_seed);
    return d;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
    DataOptions data;
    std::string index;
    std::string estimator = "lgp";
    std::size_t k = 5;
    std::size_t samples = 1;
    std::string sigma = "auto";
    double lr = 1e-2;
    std::string lr_grid;
    std::size_t batch = 32;
    std::optional<double> budget_seconds;
    std::size_t iterations = 1000;
    std::size_t eval_intervals = 10;
    std::string param = "linear";
    std::string sampler = "sequential";
    std::size_t probe_trials = 0;
    std::uint64_t seed = 0;
    std::string out = "out";
};

void add_train_flags(CLI::App* sub, TrainOptions& o) {
    sub->add_option("--estimator", o.estimator, "pl-pg, pl-cov, pl-rank, lgp, lgp-mips or lrp")->capture_default_str();
    sub->add_option("--k", o.k, "slate size K")->capture_default_str();
    sub->add_option("--s", o.samples, "Monte Carlo samples S per context")->capture_default_str();
    sub->add_option("--sigma", o.sigma, "auto (1/L), norm (1/B) or a value")->capture_default_str();
    sub->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
    sub->add_option("--batch", o.batch, "contexts per iteration")->capture_default_str();
    sub->add_option("--eval-intervals", o.eval_intervals, "evaluation points over the budget")->capture_default_str();
    sub->add_option("--param", o.param, "linear or two-layer")->capture_default_str();
    sub->add_option("--sampler", o.sampler, "PL sampler: sequential or gumbel")->capture_default_str();
}

TrainConfig make_train_config(const TrainOptions& o, const EmbeddingMatrix& beta) {
    const MethodSpec method = method_from_label(o.estimator, TrainConfig{});
    TrainConfig c = method.config;
    c.samples = o.samples;
    c.k = o.k;
    c.sigma = resolve_sigma(o.sigma, beta);
    c.lr = o.lr;
    c.batch_size = o.batch;
    c.budget = o.budget_seconds ? Budget::of_seconds(*o.budget_seconds) : Budget::of_iterations(o.iterations);
    c.eval_intervals = o.eval_intervals;
    c.seed = o.seed;
    c.probe_trials = o.probe_trials;
    if (o.param == "linear") c.param_kind = ParamKind::Linear;
    else if (o.param == "two-layer") c.param_kind = ParamKind::TwoLayer;
    else throw ConfigError("--param must be linear or two-layer");
    if (o.sampler == "sequential") c.sampler = PlSampler::Sequential;
    else if (o.sampler == "gumbel") c.sampler = PlSampler::Gumbel;
    else throw ConfigError("--sampler must be sequential or gumbel");
    return c;
}

int run_train(const TrainOptions& o) {
    const EmbeddingMatrix beta = load_embeddings(o.data.embeddings);
    const LoadedData d = load_data(o.data, beta.actions());
    TrainConfig config = make_train_config(o, beta);

    std::optional<ApproxIndex> approx;
    if (config.index == IndexKind::Approx) {
        approx = o.index.empty() ? ApproxIndex::build(beta, ApproxParams{}, RngStream(o.seed, 9))
                                 : ApproxIndex::load(o.index, beta);
    }
    const MipsIndex* index = approx ? &*approx : nullptr;

    fs::create_directories(o.out);
    std::vector<double> grid;
    for (const std::string& v : split_list(o.lr_grid)) grid.push_back(std::stod(v));
    std::string sweep_csv;
    if (!grid.empty()) {
        sweep_csv = "lr,final_val_reward\n";
        double best = -1.0;
        for (double lr : grid) {
            TrainConfig trial = config;
            trial.lr = lr;
            const TrainResult r = train(trial, beta, d.split, d.partition, index);
            const double final_reward = r.log.records.back().val_reward;
            std::ostringstream row;
            row << std::setprecision(17) << lr << ',' << final_reward << '\n';
            sweep_csv += row.str();
            if (final_reward > best) {
                best = final_reward;
                config.lr = lr;
            }
        }
        write_file(fs::path(o.out) / "lr_sweep.csv", sweep_csv);
        std::cout << "selected lr=" << config.lr << " (validation reward " << best << ")\n";
    }

    const TrainResult result = train(config, beta, d.split, d.partition, index);
    save_params(result.params, fs::path(o.out) / "params.bin");
    result.log.write_csv(fs::path(o.out) / "train_log.csv");
    result.log.write_json(fs::path(o.out) / "train_log.json");
    std::vector<std::string> files{"params.bin", "train_log.csv", "train_log.json"};
    if (!grid.empty()) files.push_back("lr_sweep.csv");
    record_manifest(o.out, "train",
                    {{"data", o.data.data},
                     {"embeddings", o.data.embeddings},
                     {"index", o.index},
                     {"estimator", o.estimator},
                     {"k", o.k},
                     {"s", o.samples},
                     {"sigma", config.sigma},
                     {"lr", config.lr},
                     {"batch", o.batch},
                     {"budget", o.budget_seconds ? nlohmann::json{{"seconds", *o.budget_seconds}}
                                                 : nlohmann::json{{"iterations", o.iterations}}},
                     {"split_ratio", o.data.ratio},
                     {"split_seed", o.data.split_seed},
                     {"seed", o.seed}},
                    files);
    const TrainRecord& last = result.log.records.back();
    std::cout << "iterations=" << result.iterations << " val_reward=" << last.val_reward << '\n';
    return 0;
}

// ---------------------------------------------------------------- benches

struct BenchOptions {
    std::string scenario = "small";
    std::string methods = "lgp-mips,lgp,pl-pg";
    std::string seeds = "1,2,3,4,5,6";
    double budget_seconds = 120.0;
    std::size_t iterations = 1000;
    std::size_t k = 5;
    std::size_t samples = 1;
    double lr = 1e-3;
    std::string ks = "2,10";
    std::size_t trials = 10000;
    std::string sigmas;
    std::uint64_t seed = 0;
    std::string out = "results";
};

void print_report(const BenchReport& r) { std::cout << r.to_csv(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slate_forge: large-action slate policy learning"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    std::size_t threads = 0;
    app.add_option("--threads", threads, "worker thread cap (default: SLATE_FORGE_THREADS or all cores)");
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

    // gen-data
    SyntheticConfig gen;
    std::string gen_out = "out";
    auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic interaction CSV");
    gen_cmd->add_option("--users", gen.users)->capture_default_str();
    gen_cmd->add_option("--actions", gen.actions)->capture_default_str();
    gen_cmd->add_option("--latent", gen.latent_dim, "rank of the interaction logits")->capture_default_str();
    gen_cmd->add_option("--density", gen.density)->capture_default_str();
    gen_cmd->add_option("--signal", gen.signal)->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "output directory")->capture_default_str();

    // embed
    DataOptions embed_data;
    std::size_t embed_dim = 32, embed_iters = 6;
    bool embed_full = false;
    std::string embed_out = "out";
    auto* embed_cmd = app.add_subcommand("embed", "truncated-SVD action embeddings (SLEB)");
    add_data_options(embed_cmd, embed_data, false);
    embed_cmd->add_option("--dim", embed_dim, "latent dimension L")->capture_default_str();
    embed_cmd->add_option("--iters", embed_iters, "subspace iterations")->capture_default_str();
    embed_cmd->add_flag("--full", embed_full, "factor the full matrix instead of the observed half");
    embed_cmd->add_option("--out", embed_out, "output directory")->capture_default_str();

    // build-index
    std::string index_emb, index_out = "out";
    ApproxParams index_params;
    auto* index_cmd = app.add_subcommand("build-index", "approximate MIPS index (SLMI)");
    index_cmd->add_option("--embeddings", index_emb, "SLEB file")->required();
    index_cmd->add_option("--max-degree", index_params.max_degree)->capture_default_str();
    index_cmd->add_option("--build-beam", index_params.build_beam)->capture_default_str();
    index_cmd->add_option("--out", index_out, "output directory")->capture_default_str();

    // train
    TrainOptions train_opts;
    auto* train_cmd = app.add_subcommand("train", "train a policy");
    add_data_options(train_cmd, train_opts.data, true);
    add_train_flags(train_cmd, train_opts);
    train_cmd->add_option("--index", train_opts.index, "SLMI index for lgp-mips (built on the fly if absent)");
    train_cmd->add_option("--lr-grid", train_opts.lr_grid, "comma-separated learning rates to sweep on validation");
    auto* secs = train_cmd->add_option("--budget-seconds", train_opts.budget_seconds, "wall-clock budget");
    train_cmd->add_option("--iterations", train_opts.iterations, "iteration budget")
        ->capture_default_str()
        ->excludes(secs);
    train_cmd->add_option("--probe-trials", train_opts.probe_trials, "gradient-variance probe trials per evaluation");
    train_cmd->add_option("--out", train_opts.out, "output directory")->capture_default_str();

    // eval
    DataOptions eval_data;
    std::string eval_params;
    std::size_t eval_k = 5;
    std::string eval_users = "validation";
    auto* eval_cmd = app.add_subcommand("eval", "deterministic reward of trained parameters");
    eval_cmd->add_option("--data", eval_data.data, "interaction CSV (default: from the params manifest)");
    eval_cmd->add_option("--embeddings", eval_data.embeddings, "SLEB file (default: from the params manifest)");
    eval_cmd->add_option("--split-ratio", eval_data.ratio)->capture_default_str();
    eval_cmd->add_option("--split-seed", eval_data.split_seed)->capture_default_str();
    eval_cmd->add_option("--validation", eval_data.validation)->capture_default_str();
    eval_cmd->add_option("--params", eval_params, "SLPP parameter file")->required();
    eval_cmd->add_option("--k", eval_k)->capture_default_str();
    eval_cmd->add_option("--users", eval_users, "validation, train or all")->capture_default_str();

    // benches
    BenchOptions bt, bi, bv, bb;
    auto add_common = [](CLI::App* sub, BenchOptions& o) {
        sub->add_option("--scenario", o.scenario, "small, medium or large")->capture_default_str();
        sub->add_option("--seeds", o.seeds, "comma-separated seeds")->capture_default_str();
        sub->add_option("--k", o.k)->capture_default_str();
        sub->add_option("--out", o.out, "results directory")->capture_default_str();
    };
    auto* bt_cmd = app.add_subcommand("bench-time", "equal wall-clock budget comparison");
    add_common(bt_cmd, bt);
    bt_cmd->add_option("--methods", bt.methods)->capture_default_str();
    bt_cmd->add_option("--budget-seconds", bt.budget_seconds)->capture_default_str();
    bt_cmd->add_option("--s", bt.samples)->capture_default_str();
    bt_cmd->add_option("--lr", bt.lr)->capture_default_str();

    auto* bi_cmd = app.add_subcommand("bench-iter", "equal iteration budget comparison");
    add_common(bi_cmd, bi);
    bi_cmd->add_option("--methods", bi.methods)->capture_default_str();
    bi_cmd->add_option("--iterations", bi.iterations)->capture_default_str();
    bi_cmd->add_option("--s", bi.samples)->capture_default_str();
    bi_cmd->add_option("--lr", bi.lr)->capture_default_str();

    auto* bv_cmd = app.add_subcommand("bench-variance", "gradient variance against K (and sigma)");
    add_common(bv_cmd, bv);
    bv.methods = "pl-pg,lgp";
    bv_cmd->add_option("--methods", bv.methods, "estimators")->capture_default_str();
    bv_cmd->add_option("--ks", bv.ks)->capture_default_str();
    bv_cmd->add_option("--trials", bv.trials)->capture_default_str();
    bv_cmd->add_option("--sigmas", bv.sigmas, "also run the sigma-scaling study over these values");

    auto* bb_cmd = app.add_subcommand("bench-beta", "fixed versus learned embeddings");
    add_common(bb_cmd, bb);
    bb.k = 2;
    bb.trials = 200;
    bb.iterations = 200;
    bb.lr = 1e-2;
    bb_cmd->add_option("--iterations", bb.iterations)->capture_default_str();
    bb_cmd->add_option("--trials", bb.trials)->capture_default_str();
    bb_cmd->add_option("--lr", bb.lr)->capture_default_str();

    // recall
    std::string recall_emb, recall_index;
    std::size_t recall_queries = 100, recall_k = 10, recall_beam = 0;
    auto* recall_cmd = app.add_subcommand("recall", "recall@K of an approximate index");
    recall_cmd->add_option("--embeddings", recall_emb, "SLEB file (default: from the index manifest)");
    recall_cmd->add_option("--index", recall_index, "SLMI file")->required();
    recall_cmd->add_option("--queries", recall_queries)->capture_default_str();
    recall_cmd->add_option("--k", recall_k)->capture_default_str();
    recall_cmd->add_option("--beam", recall_beam, "query beam (default: index default)");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = merge_config(std::move(args));
        // CLI11 consumes the vector from the back.
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (threads > 0) set_max_threads(threads);
        train_opts.seed = seed;

        if (*gen_cmd) {
            gen.seed = seed;
            const InteractionDataset ds = generate_synthetic(gen);
            fs::create_directories(gen_out);
            save_interactions(ds, fs::path(gen_out) / "interactions.csv");
            record_manifest(gen_out, "gen-data",
                            {{"users", gen.users},
                             {"actions", gen.actions},
                             {"latent", gen.latent_dim},
                             {"density", gen.density},
                             {"signal", gen.signal},
                             {"seed", seed}},
                            {"interactions.csv"});
            std::cout << "users=" << ds.users() << " actions=" << ds.actions()
                      << " interactions=" << ds.interactions() << " density=" << ds.density() << '\n';
        } else if (*embed_cmd) {
            const LoadedData d = load_data(embed_data);
            const InteractionDataset source = embed_full ? d.ds : observed_interactions(d.split, d.ds.actions());
            const EmbeddingMatrix beta = compute_svd_embeddings(source, embed_dim, embed_iters, seed);
            fs::create_directories(embed_out);
            save_embeddings(beta, fs::path(embed_out) / "embeddings.sleb");
            record_manifest(embed_out, "embed",
                            {{"data", embed_data.data},
                             {"dim", embed_dim},
                             {"iters", embed_iters},
                             {"full", embed_full},
                             {"split_ratio", embed_data.ratio},
                             {"split_seed", embed_data.split_seed},
                             {"seed", seed}},
                            {"embeddings.sleb"});
            std::cout << "L=" << beta.dim() << " P=" << beta.actions() << " B=" << beta.mean_norm() << '\n';
        } else if (*index_cmd) {
            const EmbeddingMatrix beta = load_embeddings(index_emb);
            const ApproxIndex index = ApproxIndex::build(beta, index_params, RngStream(seed, 9));
            fs::create_directories(index_out);
            index.save(fs::path(index_out) / "index.slmi");
            record_manifest(index_out, "build-index",
                            {{"embeddings", index_emb},
                             {"max_degree", index_params.max_degree},
                             {"build_beam", index_params.build_beam},
                             {"seed", seed}},
                            {"index.slmi"});
            std::cout << "layers=" << index.layer_count() << " reachable=" << index.reachable_count() << '\n';
        } else if (*train_cmd) {
            return run_train(train_opts);
        } else if (*eval_cmd) {
            if (eval_data.data.empty()) eval_data.data = manifest_setting(eval_params, "train", "data");
            if (eval_data.embeddings.empty())
                eval_data.embeddings = manifest_setting(eval_params, "train", "embeddings");
            require_input(eval_data.data, "--data");
            require_input(eval_data.embeddings, "--embeddings");
            const EmbeddingMatrix beta = load_embeddings(eval_data.embeddings);
            const LoadedData d = load_data(eval_data, beta.actions());
            const PolicyParams params = load_params(eval_params);
            std::vector<std::size_t> users;
            if (eval_users == "validation") users = d.partition.validation;
            else if (eval_users == "train") users = d.partition.train;
            else if (eval_users == "all") {
                users.resize(d.split.size());
                for (std::size_t i = 0; i < users.size(); ++i) users[i] = i;
            } else throw ConfigError("--users must be validation, train or all");
            std::cout << std::setprecision(17) << evaluate_deterministic(params, beta, d.split, users, eval_k) << '\n';
        } else if (*bt_cmd || *bi_cmd) {
            BenchOptions& o = *bt_cmd ? bt : bi;
            const ScenarioData data = prepare_scenario(scenario_preset(o.scenario), true);
            TrainConfig base;
            base.k = o.k;
            base.samples = o.samples;
            base.lr = o.lr;
            std::vector<MethodSpec> methods;
            for (const std::string& label : split_list(o.methods)) methods.push_back(method_from_label(label, base));
            const std::vector<std::uint64_t> seeds = parse_seeds(o.seeds);
            const BenchReport report = *bt_cmd ? bench_time_budget(data, methods, o.budget_seconds, seeds)
                                               : bench_iteration_budget(data, methods, o.iterations, seeds);
            const std::string stem = std::string(*bt_cmd ? "time_budget_" : "iteration_budget_") + o.scenario;
            report.write(o.out, stem);
            record_manifest(o.out, *bt_cmd ? "bench-time" : "bench-iter",
                            {{"scenario", o.scenario}, {"methods", o.methods}, {"seeds", o.seeds}},
                            {stem + ".csv", stem + "_long.csv", stem + ".json"});
            print_report(report);
        } else if (*bv_cmd) {
            const ScenarioData data = prepare_scenario(scenario_preset(bv.scenario));
            std::vector<EstimatorKind> kinds;
            for (const std::string& name : split_list(bv.methods)) kinds.push_back(parse_estimator(name));
            std::vector<std::size_t> ks;
            for (const std::string& v : split_list(bv.ks)) ks.push_back(std::stoul(v));
            const std::vector<std::uint64_t> seeds = parse_seeds(bv.seeds);
            const BenchReport report = bench_variance_vs_k(data, kinds, ks, bv.trials, seeds);
            const std::string stem = "variance_k_" + bv.scenario;
            report.write(bv.out, stem);
            std::vector<std::string> files{stem + ".csv", stem + "_long.csv", stem + ".json"};
            print_report(report);
            if (!bv.sigmas.empty()) {
                std::vector<double> sigmas;
                for (const std::string& v : split_list(bv.sigmas)) sigmas.push_back(std::stod(v));
                const BenchReport sr = bench_sigma_scaling(data, sigmas, bv.k, bv.trials, seeds);
                const std::string sstem = "variance_sigma_" + bv.scenario;
                sr.write(bv.out, sstem);
                files.insert(files.end(), {sstem + ".csv", sstem + "_long.csv", sstem + ".json"});
                print_report(sr);
                for (const auto& [key, value] : sr.fingerprint)
                    if (key == "loglog_slope") std::cout << "loglog_slope=" << value << '\n';
            }
            record_manifest(bv.out, "bench-variance",
                            {{"scenario", bv.scenario}, {"methods", bv.methods}, {"ks", bv.ks},
                             {"trials", bv.trials}, {"sigmas", bv.sigmas}, {"seeds", bv.seeds}},
                            files);
        } else if (*bb_cmd) {
            const ScenarioData data = prepare_scenario(scenario_preset(bb.scenario));
            FixedBetaConfig config;
            config.k = bb.k;
            config.lr = bb.lr;
            config.iterations = bb.iterations;
            config.trials = bb.trials;
            config.seed = parse_seeds(bb.seeds).front();
            const FixedBetaResult r = bench_fixed_beta(data, config);
            r.variance.write(bb.out, "fixed_beta_variance_" + bb.scenario);
            r.reward.write(bb.out, "fixed_beta_reward_" + bb.scenario);
            record_manifest(bb.out, "bench-beta",
                            {{"scenario", bb.scenario}, {"k", bb.k}, {"iterations", bb.iterations},
                             {"trials", bb.trials}, {"seed", config.seed}},
                            {"fixed_beta_variance_" + bb.scenario + ".csv",
                             "fixed_beta_reward_" + bb.scenario + ".csv"});
            print_report(r.variance);
            print_report(r.reward);
            std::cout << "seconds_per_iteration learn-theta=" << r.theta_seconds_per_iteration
                      << " learn-beta=" << r.beta_seconds_per_iteration << '\n';
        } else if (*recall_cmd) {
            if (recall_emb.empty()) recall_emb = manifest_setting(recall_index, "build-index", "embeddings");
            require_input(recall_emb, "--embeddings");
            const EmbeddingMatrix beta = load_embeddings(recall_emb);
            ApproxIndex index = ApproxIndex::load(recall_index, beta);
            if (recall_beam > 0) index.set_query_beam(recall_beam);
            // Queries are observed-set style mean embeddings of random action groups.
            RngStream rng(seed, 17);
            std::vector<LatentVector> queries(recall_queries);
            for (LatentVector& q : queries) {
                std::vector<ActionId> group(10);
                for (ActionId& a : group) a = static_cast<ActionId>(rng.uniform_index(beta.actions()));
                q = mean_embedding(beta, group);
            }
            const RecallReport rep = measure_recall(index, ExactIndex(beta), queries, recall_k);
            std::cout << "recall@" << rep.k << "=" << rep.recall << " queries=" << rep.query_count << '\n';
        }
    } catch (const IoError& e) {
        std::cerr << "error: io: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: parse: " << e.what() << '\n';
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: validation: " << e.what() << '\n';
        return 1;
    } catch (const TrainingDiverged& e) {
        std::cerr << "error: diverged: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
