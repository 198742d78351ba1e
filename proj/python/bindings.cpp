#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "biobo/acquire.hpp"
#include "biobo/commands.hpp"
#include "biobo/enrich.hpp"
#include "biobo/experiment.hpp"
#include "biobo/genepool.hpp"
#include "biobo/loop.hpp"
#include "biobo/stats.hpp"
#include "biobo/surrogate.hpp"

namespace py = pybind11;
using namespace biobo;

namespace {

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json py_to_json(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Biology-informed batch Bayesian optimization over gene pools";

    auto base_error = py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)base_error;

    // --- genepool ----------------------------------------------------------
    py::class_<GenePool>(m, "GenePool")
        .def(py::init<std::vector<GeneId>, std::map<std::string, Eigen::MatrixXd>, Eigen::VectorXd>(), py::arg("ids"),
             py::arg("modalities"), py::arg("labels"))
        .def("__len__", &GenePool::size)
        .def_property_readonly("ids", &GenePool::ids)
        .def_property_readonly("labels", &GenePool::labels)
        .def("modality_names", &GenePool::modality_names)
        .def("modality", &GenePool::modality, py::arg("name"))
        .def("label", &GenePool::label, py::arg("id"))
        .def("index_of", &GenePool::index_of, py::arg("id"))
        .def("__contains__", &GenePool::contains);

    py::class_<PathwayDB>(m, "PathwayDB")
        .def(py::init<>())
        .def("add", &PathwayDB::add, py::arg("name"), py::arg("genes"))
        .def("__len__", &PathwayDB::size)
        .def_property_readonly("pathways", &PathwayDB::pathways)
        .def("genes", &PathwayDB::genes, py::arg("name"))
        .def("restricted_to", &PathwayDB::restricted_to, py::arg("universe"));

    py::class_<SynthParams>(m, "SynthParams")
        .def(py::init<>())
        .def_readwrite("n_genes", &SynthParams::n_genes)
        .def_readwrite("d", &SynthParams::d)
        .def_readwrite("n_pathways", &SynthParams::n_pathways)
        .def_readwrite("signal_pathways", &SynthParams::signal_pathways)
        .def_readwrite("noise_sd", &SynthParams::noise_sd)
        .def_readwrite("seed", &SynthParams::seed);

    m.def(
        "synth_benchmark",
        [](const SynthParams& p) {
            std::vector<std::string> signal;
            auto [pool, db] = synth_benchmark(p, &signal);
            return py::make_tuple(std::move(pool), std::move(db), signal);
        },
        py::arg("params") = SynthParams{}, "Returns (pool, pathways, signal pathway names).");
    m.def(
        "load_pool",
        [](const std::map<std::string, std::filesystem::path>& embeddings, const std::filesystem::path& labels,
           std::optional<std::filesystem::path> gmt) {
            std::vector<EmbeddingTable> tables;
            for (const auto& [name, path] : embeddings) tables.push_back(load_embeddings(path, name));
            auto [pool, db] = build_pool(tables, load_labels(labels), gmt ? parse_gmt(*gmt) : PathwayDB{});
            return py::make_tuple(std::move(pool), std::move(db));
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("gmt") = std::nullopt);
    m.def("parse_gmt", &parse_gmt, py::arg("path"));
    m.def("fuse", &fuse, py::arg("pool"), py::arg("modalities"));
    m.def("train_test_split", [](const GenePool& pool, double fraction, std::uint64_t seed) {
        auto s = train_test_split(pool, fraction, seed);
        return py::make_tuple(s.train, s.test);
    });

    // --- enrich ------------------------------------------------------------
    m.def("hypergeom_p", &hypergeom_p, py::arg("universe"), py::arg("pathway_size"), py::arg("sample_size"),
          py::arg("overlap"));
    m.def(
        "odds_ratio", [](long long a, long long b, long long c, long long d) { return odds_ratio({a, b, c, d}); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"));
    m.def("bonferroni", &bonferroni);
    m.def("combined_score", &combined_score, py::arg("odds"), py::arg("p_value"));

    py::class_<EnrichmentRow>(m, "EnrichmentRow")
        .def_readonly("pathway", &EnrichmentRow::pathway)
        .def_readonly("overlap", &EnrichmentRow::overlap)
        .def_readonly("pathway_size", &EnrichmentRow::pathway_size)
        .def_readonly("p_value", &EnrichmentRow::p_value)
        .def_readonly("p_adjusted", &EnrichmentRow::p_adjusted)
        .def_readonly("odds_ratio", &EnrichmentRow::odds_ratio)
        .def_readonly("combined_score", &EnrichmentRow::combined_score);
    py::class_<EnrichmentTable>(m, "EnrichmentTable")
        .def_readonly("rows", &EnrichmentTable::rows)
        .def_readonly("universe_size", &EnrichmentTable::universe_size)
        .def_readonly("sample_size", &EnrichmentTable::sample_size)
        .def_readonly("skipped_zero_overlap", &EnrichmentTable::skipped_zero_overlap)
        .def("num_significant", &EnrichmentTable::num_significant, py::arg("alpha") = significance_level);
    m.def("run_enrichment",
          py::overload_cast<const std::vector<GeneId>&, const std::set<GeneId>&, const PathwayDB&>(&run_enrichment),
          py::arg("sample"), py::arg("universe"), py::arg("db"));
    m.def("run_enrichment",
          py::overload_cast<const std::vector<GeneId>&, const GenePool&, const PathwayDB&>(&run_enrichment),
          py::arg("sample"), py::arg("pool"), py::arg("db"));

    py::enum_<Aggregation>(m, "Aggregation").value("mean", Aggregation::mean).value("max", Aggregation::max);
    py::class_<PriorWeights>(m, "PriorWeights")
        .def_readonly("ids", &PriorWeights::ids)
        .def_readonly("score", &PriorWeights::score)
        .def_readonly("prob", &PriorWeights::prob)
        .def_readonly("significant_pathways", &PriorWeights::significant_pathways)
        .def("is_uniform", &PriorWeights::is_uniform)
        .def("max_min_ratio", &PriorWeights::max_min_ratio);
    m.def("build_prior",
          py::overload_cast<const std::vector<GeneId>&, const EnrichmentTable&, const PathwayDB&, double, Aggregation>(
              &build_prior),
          py::arg("unlabeled"), py::arg("table"), py::arg("db"), py::arg("temperature") = 0.1,
          py::arg("agg") = Aggregation::mean);

    // --- surrogate ---------------------------------------------------------
    py::class_<Posterior>(m, "Posterior")
        .def(py::init([](Eigen::VectorXd mean, Eigen::VectorXd sd, std::vector<GeneId> ids) {
                 Posterior p{std::move(ids), std::move(mean), std::move(sd)};
                 p.validate();
                 return p;
             }),
             py::arg("mean"), py::arg("sd"), py::arg("ids") = std::vector<GeneId>{})
        .def_readonly("ids", &Posterior::ids)
        .def_readonly("mean", &Posterior::mean)
        .def_readonly("sd", &Posterior::sd);

    py::class_<GPConfig>(m, "GPConfig")
        .def(py::init<>())
        .def_readwrite("lengthscale", &GPConfig::lengthscale)
        .def_readwrite("signal_variance", &GPConfig::signal_variance)
        .def_readwrite("noise_variance", &GPConfig::noise_variance)
        .def_readwrite("jitter", &GPConfig::jitter);
    py::class_<EnsembleConfig>(m, "EnsembleConfig")
        .def(py::init<>())
        .def_readwrite("members", &EnsembleConfig::members)
        .def_readwrite("hidden_width", &EnsembleConfig::hidden_width)
        .def_readwrite("depth", &EnsembleConfig::depth)
        .def_readwrite("learning_rate", &EnsembleConfig::learning_rate)
        .def_readwrite("weight_decay", &EnsembleConfig::weight_decay)
        .def_readwrite("max_epochs", &EnsembleConfig::max_epochs)
        .def_readwrite("patience", &EnsembleConfig::patience)
        .def_readwrite("batch_size", &EnsembleConfig::batch_size)
        .def_readwrite("observation_noise_sd", &EnsembleConfig::observation_noise_sd)
        .def_readwrite("validation_fraction", &EnsembleConfig::validation_fraction);

    py::class_<SurrogateModel>(m, "SurrogateModel")
        .def("predict", &SurrogateModel::predict, py::arg("x"), py::arg("ids") = std::vector<GeneId>{})
        .def("sample", &SurrogateModel::sample, py::arg("x"), py::arg("seed"))
        .def_property_readonly("name", &SurrogateModel::name);
    py::class_<GaussianProcess, SurrogateModel>(m, "GaussianProcess")
        .def_property_readonly("lengthscale", &GaussianProcess::lengthscale)
        .def_property_readonly("effective_jitter", &GaussianProcess::effective_jitter);
    py::class_<DeepEnsemble, SurrogateModel>(m, "DeepEnsemble").def("__len__", &DeepEnsemble::size);

    m.def("fit_gp", &fit_gp, py::arg("x"), py::arg("y"), py::arg("config") = GPConfig{});
    m.def("fit_ensemble", &fit_ensemble, py::arg("x"), py::arg("y"), py::arg("config") = EnsembleConfig{},
          py::arg("seed") = 0, py::call_guard<py::gil_scoped_release>());
    m.def(
        "eval_metrics",
        [](const Posterior& p, const Eigen::VectorXd& y, const std::vector<double>& fractions) {
            return json_to_py(to_json(eval_metrics(p, y, fractions)));
        },
        py::arg("posterior"), py::arg("y_true"), py::arg("fractions") = std::vector<double>{0.01, 0.05, 0.10});

    // --- acquire -----------------------------------------------------------
    py::class_<AcquisitionScores>(m, "AcquisitionScores")
        .def(py::init([](std::vector<GeneId> ids, std::vector<double> raw) {
                 AcquisitionScores s{std::move(ids), std::move(raw), std::nullopt};
                 s.validate();
                 return s;
             }),
             py::arg("ids"), py::arg("raw"))
        .def_readonly("ids", &AcquisitionScores::ids)
        .def_readonly("raw", &AcquisitionScores::raw)
        .def_readonly("weighted", &AcquisitionScores::weighted);
    m.def("expected_improvement", &expected_improvement, py::arg("mean"), py::arg("sd"), py::arg("y_best"));
    m.def("ei", &ei, py::arg("posterior"), py::arg("y_best"));
    m.def("ucb", &ucb, py::arg("posterior"), py::arg("kappa") = 1.0);
    m.def("ts", &ts, py::arg("model"), py::arg("candidates"), py::arg("ids"), py::arg("seed"));
    m.def("bio_augment", &bio_augment, py::arg("scores"), py::arg("prior"), py::arg("beta"), py::arg("labeled_count"));
    m.def("select_batch", &select_batch, py::arg("scores"), py::arg("batch_size"));
    m.def("random_policy", &random_policy, py::arg("unlabeled"), py::arg("batch_size"), py::arg("seed"));
    m.def("greedy_ea_policy", &greedy_ea_policy, py::arg("prior"), py::arg("batch_size"));

    // --- loop --------------------------------------------------------------
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def(py::init([](const py::kwargs& kw) {
            auto j = to_json(RunConfig{});
            j.erase("init_size");  // keep "defaults to batch_size" unless given
            j.merge_patch(py_to_json(kw));
            return run_config_from_json(j);
        }))
        .def("to_dict", [](const RunConfig& c) { return json_to_py(to_json(c)); })
        .def_static("from_dict", [](const py::dict& d) { return run_config_from_json(py_to_json(d)); })
        .def("validate", &RunConfig::validate)
        .def_property_readonly("label", &RunConfig::label)
        .def_property_readonly("hash", &RunConfig::hash)
        .def("__repr__", [](const RunConfig& c) { return "<RunConfig " + c.label() + " seed=" + std::to_string(c.seed) + ">"; });

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("config", &RunResult::config)
        .def_readonly("exhausted", &RunResult::exhausted)
        .def_property_readonly("final_recall", &RunResult::final_recall)
        .def_property_readonly("labels_used", &RunResult::labels_used)
        .def_property_readonly("records", [](const RunResult& r) {
            py::list out;
            for (const auto& rec : r.records) out.append(json_to_py(to_json(rec)));
            return out;
        });

    m.def("run", &run, py::arg("pool"), py::arg("db"), py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("true_topk", &true_topk, py::arg("pool"), py::arg("percentile") = 0.01);
    m.def("cumulative_topk_recall", &cumulative_topk_recall, py::arg("labeled"), py::arg("topk"));
    m.def("regret_factor", &regret_factor, py::arg("prior"), py::arg("beta"), py::arg("labeled_count"));
    m.def("labels_to_reach", &labels_to_reach, py::arg("result"), py::arg("target"));
    m.def("labeling_efficiency",
          py::overload_cast<const RunResult&, const RunResult&, double>(&labeling_efficiency), py::arg("a"),
          py::arg("b"), py::arg("target"));

    // --- stats / cli -------------------------------------------------------
    m.def("pearson", &stats::pearson);
    m.def("spearman", &stats::spearman);
    m.def("sem", &stats::sem);

    auto cli = m.def_submodule("cli", "Command implementations; each returns its output directory");
    auto opts = [](std::optional<std::filesystem::path> out_dir, std::size_t jobs, std::optional<std::uint64_t> seed) {
        cli::GlobalOptions o;
        o.out_dir = std::move(out_dir);
        o.jobs = jobs;
        o.seed = seed;
        return o;
    };
    cli.def(
        "run",
        [opts](const std::filesystem::path& spec, std::optional<std::filesystem::path> out_dir, std::size_t jobs,
               std::optional<std::uint64_t> seed) {
            py::gil_scoped_release release;
            return cli::cmd_run(spec, opts(std::move(out_dir), jobs, seed));
        },
        py::arg("spec"), py::arg("out_dir") = std::nullopt, py::arg("jobs") = 1, py::arg("seed") = std::nullopt);
    cli.def(
        "eval_surrogate",
        [opts](const std::filesystem::path& spec, std::optional<std::filesystem::path> out_dir, std::size_t jobs,
               std::optional<std::uint64_t> seed) {
            py::gil_scoped_release release;
            return cli::cmd_eval_surrogate(spec, opts(std::move(out_dir), jobs, seed));
        },
        py::arg("spec"), py::arg("out_dir") = std::nullopt, py::arg("jobs") = 1, py::arg("seed") = std::nullopt);
    cli.def(
        "enrich",
        [opts](const std::filesystem::path& labels, const std::filesystem::path& gmt, double fraction,
               std::optional<std::filesystem::path> run_file, bool all_rows,
               std::optional<std::filesystem::path> out_dir) {
            cli::EnrichOptions e{labels, gmt, fraction, std::move(run_file), all_rows};
            return cli::cmd_enrich(e, opts(std::move(out_dir), 1, std::nullopt));
        },
        py::arg("labels"), py::arg("gmt"), py::arg("fraction") = 0.1, py::arg("run_file") = std::nullopt,
        py::arg("all_rows") = false, py::arg("out_dir") = std::nullopt);
    cli.def(
        "correlate",
        [opts](const std::filesystem::path& recall, const std::filesystem::path& metrics, const std::string& method,
               std::optional<std::filesystem::path> out_dir) {
            return cli::cmd_correlate(recall, metrics, cli::parse_correlation_method(method),
                                      opts(std::move(out_dir), 1, std::nullopt));
        },
        py::arg("recall"), py::arg("metrics"), py::arg("method") = "spearman", py::arg("out_dir") = std::nullopt);
    cli.def(
        "report",
        [opts](const std::filesystem::path& run_dir, std::optional<std::filesystem::path> out_dir) {
            return cli::cmd_report(run_dir, opts(std::move(out_dir), 1, std::nullopt));
        },
        py::arg("run_dir"), py::arg("out_dir") = std::nullopt);
}
