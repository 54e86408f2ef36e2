// pybind11 bindings for the slate_forge core library.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>

#include "slate_forge/data.hpp"
#include "slate_forge/error.hpp"
#include "slate_forge/gradients.hpp"
#include "slate_forge/mips.hpp"
#include "slate_forge/parallel.hpp"
#include "slate_forge/policy.hpp"
#include "slate_forge/train.hpp"

namespace py = pybind11;
using namespace slate_forge;

namespace {

using Beta = std::shared_ptr<const EmbeddingMatrix>;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Index wrappers own a reference to their embeddings.
struct PyExactIndex {
    Beta beta;
    ExactIndex index;
    explicit PyExactIndex(Beta b) : beta(std::move(b)), index(*beta) {}
};

struct PyApproxIndex {
    Beta beta;
    ApproxIndex index;
    PyApproxIndex(Beta b, ApproxIndex i) : beta(std::move(b)), index(std::move(i)) {}
};

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw InvalidArgument("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

Beta embeddings_from_array(const Array& a) {
    if (a.ndim() != 2) throw InvalidArgument("embeddings must be a 2-d (L, P) array");
    const auto dim = static_cast<std::size_t>(a.shape(0));
    const auto actions = static_cast<std::size_t>(a.shape(1));
    std::vector<double> column_major(dim * actions);
    for (std::size_t l = 0; l < dim; ++l)
        for (std::size_t p = 0; p < actions; ++p) column_major[p * dim + l] = a.at(l, p);
    return std::make_shared<const EmbeddingMatrix>(dim, actions, std::move(column_major));
}

py::array_t<double> embeddings_to_array(const EmbeddingMatrix& beta) {
    py::array_t<double> out({beta.dim(), beta.actions()});
    auto view = out.mutable_unchecked<2>();
    for (std::size_t p = 0; p < beta.actions(); ++p) {
        const auto col = beta.column(static_cast<ActionId>(p));
        for (std::size_t l = 0; l < beta.dim(); ++l) view(l, p) = col[l];
    }
    return out;
}

std::vector<ActionId> slate_items(const Slate& s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(_slate_forge, m) {
    m.doc() = "Slate policy learning over large action catalogs";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
    py::register_exception<InstanceTooLarge>(m, "InstanceTooLarge", PyExc_ValueError);

    m.def("set_max_threads", &set_max_threads, py::arg("n"));
    m.def("max_threads", &max_threads);

    py::class_<EmbeddingMatrix, std::shared_ptr<EmbeddingMatrix>>(m, "Embeddings")
        .def(py::init([](const Array& a) { return std::const_pointer_cast<EmbeddingMatrix>(embeddings_from_array(a)); }),
             py::arg("array"), "Build from an (L, P) array; column p is the embedding of action p.")
        .def_property_readonly("dim", &EmbeddingMatrix::dim)
        .def_property_readonly("actions", &EmbeddingMatrix::actions)
        .def_property_readonly("mean_norm", &EmbeddingMatrix::mean_norm)
        .def("numpy", &embeddings_to_array)
        .def("scores", [](const EmbeddingMatrix& b, const Array& h) { return b.scores(to_vector(h)); }, py::arg("h"))
        .def("save", [](const EmbeddingMatrix& b, const std::filesystem::path& p) { save_embeddings(b, p); })
        .def_static("load", [](const std::filesystem::path& p) {
            return std::make_shared<EmbeddingMatrix>(load_embeddings(p));
        });

    py::class_<PyExactIndex>(m, "ExactIndex")
        .def(py::init([](std::shared_ptr<EmbeddingMatrix> b) { return PyExactIndex(std::move(b)); }),
             py::arg("embeddings"))
        .def("query", [](const PyExactIndex& i, const Array& h, std::size_t k) {
            return slate_items(i.index.query(to_vector(h), k));
        }, py::arg("h"), py::arg("k"));

    py::class_<PyApproxIndex>(m, "ApproxIndex")
        .def_static("build", [](std::shared_ptr<EmbeddingMatrix> b, std::size_t max_degree, std::size_t build_beam,
                                std::size_t query_beam, std::uint64_t seed) {
            ApproxParams params{max_degree, build_beam, query_beam};
            ApproxIndex index = ApproxIndex::build(*b, params, RngStream(seed, 9));
            return PyApproxIndex(std::move(b), std::move(index));
        }, py::arg("embeddings"), py::arg("max_degree") = 16, py::arg("build_beam") = 128,
           py::arg("query_beam") = 128, py::arg("seed") = 0)
        .def_static("load", [](const std::filesystem::path& p, std::shared_ptr<EmbeddingMatrix> b) {
            ApproxIndex index = ApproxIndex::load(p, *b);
            return PyApproxIndex(std::move(b), std::move(index));
        }, py::arg("path"), py::arg("embeddings"))
        .def("save", [](const PyApproxIndex& i, const std::filesystem::path& p) { i.index.save(p); })
        .def("query", [](const PyApproxIndex& i, const Array& h, std::size_t k) {
            return slate_items(i.index.query(to_vector(h), k));
        }, py::arg("h"), py::arg("k"))
        .def("recall", [](const PyApproxIndex& i, const Array& queries, std::size_t k) {
            if (queries.ndim() != 2) throw InvalidArgument("queries must be a 2-d (n, L) array");
            std::vector<LatentVector> q(static_cast<std::size_t>(queries.shape(0)));
            for (std::size_t r = 0; r < q.size(); ++r)
                q[r].assign(queries.data(r, 0), queries.data(r, 0) + queries.shape(1));
            return measure_recall(i.index, ExactIndex(*i.beta), q, k).recall;
        }, py::arg("queries"), py::arg("k") = 10, "Mean recall@k against exhaustive search.");

    m.def("top_k", [](const Array& scores, std::size_t k) { return slate_items(top_k(to_vector(scores), k)); },
          py::arg("scores"), py::arg("k"));
    m.def("pl_log_prob", [](const Array& scores, const std::vector<ActionId>& slate) {
        return pl_log_prob_scores(to_vector(scores), Slate(slate));
    }, py::arg("scores"), py::arg("slate"), "Plackett-Luce log-probability of an ordered slate.");
    m.def("pl_sample", [](const Array& scores, std::size_t k, std::uint64_t seed, const std::string& method) {
        RngStream rng(seed);
        const std::vector<double> s = to_vector(scores);
        if (method == "sequential") return slate_items(pl_sample_sequential_scores(s, k, rng));
        if (method == "gumbel") return slate_items(pl_sample_gumbel_scores(s, k, rng));
        throw ConfigError("method must be 'sequential' or 'gumbel'");
    }, py::arg("scores"), py::arg("k"), py::arg("seed") = 0, py::arg("method") = "sequential");

    py::class_<InteractionDataset>(m, "Dataset")
        .def(py::init<std::size_t, std::vector<std::vector<ActionId>>>(), py::arg("actions"), py::arg("per_user"))
        .def_property_readonly("users", &InteractionDataset::users)
        .def_property_readonly("actions", &InteractionDataset::actions)
        .def_property_readonly("interactions", &InteractionDataset::interactions)
        .def_property_readonly("density", &InteractionDataset::density)
        .def("items", [](const InteractionDataset& d, std::size_t u) {
            if (u >= d.users()) throw py::index_error("user out of range");
            const ItemSet& s = d.items(u);
            return std::vector<ActionId>(s.begin(), s.end());
        }, py::arg("user"))
        .def("save", [](const InteractionDataset& d, const std::filesystem::path& p) { save_interactions(d, p); })
        .def_static("load", [](const std::filesystem::path& p) { return load_interactions(p); })
        .def("__eq__", [](const InteractionDataset& a, const InteractionDataset& b) { return a == b; });

    m.def("generate_synthetic", [](std::size_t users, std::size_t actions, std::size_t latent_dim, double density,
                                   double signal, std::uint64_t seed) {
        SyntheticConfig c;
        c.users = users;
        c.actions = actions;
        c.latent_dim = latent_dim;
        c.density = density;
        c.signal = signal;
        c.seed = seed;
        return generate_synthetic(c);
    }, py::arg("users") = 1000, py::arg("actions") = 5000, py::arg("latent_dim") = 8, py::arg("density") = 0.01,
       py::arg("signal") = 3.0, py::arg("seed") = 0);

    m.def("svd_embeddings", [](const InteractionDataset& d, std::size_t dim, std::size_t iterations,
                               std::uint64_t seed) {
        return std::make_shared<EmbeddingMatrix>(compute_svd_embeddings(d, dim, iterations, seed));
    }, py::arg("dataset"), py::arg("dim") = 32, py::arg("iterations") = 6, py::arg("seed") = 0);

    m.def("train", [](const InteractionDataset& d, std::shared_ptr<EmbeddingMatrix> beta, const std::string& estimator,
                      std::size_t k, std::size_t samples, double lr, std::size_t iterations, std::size_t batch_size,
                      std::uint64_t seed) {
        const SessionSplit split = split_sessions(d, 0.5, seed);
        const UserPartition partition = partition_users(split, 0.1, seed);
        TrainConfig c;
        c.estimator = parse_estimator(estimator);
        c.k = k;
        c.samples = samples;
        c.lr = lr;
        c.batch_size = batch_size;
        c.budget = Budget::of_iterations(iterations);
        c.seed = seed;
        const TrainResult r = train(c, *beta, split, partition);
        py::list rows;
        for (const TrainRecord& rec : r.log.records) {
            py::dict row;
            row["interval"] = rec.interval;
            row["iteration"] = rec.iteration;
            row["seconds"] = rec.seconds;
            row["train_reward"] = rec.train_reward ? py::cast(*rec.train_reward) : py::none();
            row["val_reward"] = rec.val_reward;
            rows.append(row);
        }
        py::dict out;
        out["params"] = std::vector<double>(r.params.flat().begin(), r.params.flat().end());
        out["log"] = rows;
        out["iterations"] = r.iterations;
        return out;
    }, py::arg("dataset"), py::arg("embeddings"), py::arg("estimator") = "lgp", py::arg("k") = 5,
       py::arg("samples") = 1, py::arg("lr") = 1e-3, py::arg("iterations") = 100, py::arg("batch_size") = 32,
       py::arg("seed") = 0, "Train a linear policy on a 50/50 observed/hidden split; returns params and the log.");
}
