#include "biobo/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace biobo {

namespace {

class TomlReader {
public:
    TomlReader(const toml::table& root, std::string source) : root_(root), source_(std::move(source)) {}

    const toml::table* table(const toml::table& parent, std::string_view key) const {
        const auto* node = parent.get(key);
        if (node == nullptr) return nullptr;
        const auto* t = node->as_table();
        if (t == nullptr) fail(std::string(key) + " must be a table");
        return t;
    }

    template <typename T>
    void number(const toml::table& t, std::string_view key, T& out) const {
        const auto* node = t.get(key);
        if (node == nullptr) return;
        if constexpr (std::is_floating_point_v<T>) {
            if (auto v = node->value<double>()) {
                out = static_cast<T>(*v);
                return;
            }
            fail(std::string(key) + " must be a number");
        } else {
            const auto v = node->value<std::int64_t>();
            if (!v || *v < 0) fail(std::string(key) + " must be a non-negative integer");
            out = static_cast<T>(*v);
        }
    }

    void boolean(const toml::table& t, std::string_view key, bool& out) const {
        const auto* node = t.get(key);
        if (node == nullptr) return;
        const auto v = node->value<bool>();
        if (!v) fail(std::string(key) + " must be a boolean");
        out = *v;
    }

    void string(const toml::table& t, std::string_view key, std::string& out) const {
        const auto* node = t.get(key);
        if (node == nullptr) return;
        const auto v = node->value<std::string>();
        if (!v) fail(std::string(key) + " must be a string");
        out = *v;
    }

    void strings(const toml::table& t, std::string_view key, std::vector<std::string>& out) const {
        const auto* node = t.get(key);
        if (node == nullptr) return;
        const auto* arr = node->as_array();
        if (arr == nullptr) fail(std::string(key) + " must be an array of strings");
        out.clear();
        for (const auto& item : *arr) {
            const auto v = item.value<std::string>();
            if (!v) fail(std::string(key) + " must be an array of strings");
            out.push_back(*v);
        }
    }

    template <typename T>
    void numbers(const toml::table& t, std::string_view key, std::vector<T>& out) const {
        const auto* node = t.get(key);
        if (node == nullptr) return;
        const auto* arr = node->as_array();
        if (arr == nullptr) fail(std::string(key) + " must be an array of numbers");
        out.clear();
        for (const auto& item : *arr) {
            if constexpr (std::is_floating_point_v<T>) {
                const auto v = item.value<double>();
                if (!v) fail(std::string(key) + " must be an array of numbers");
                out.push_back(static_cast<T>(*v));
            } else {
                const auto v = item.value<std::int64_t>();
                if (!v || *v < 0) fail(std::string(key) + " must be an array of non-negative integers");
                out.push_back(static_cast<T>(*v));
            }
        }
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, what); }

    const toml::table& root() const noexcept { return root_; }

private:
    const toml::table& root_;
    std::string source_;
};

void read_run_defaults(const TomlReader& r, const toml::table& run, RunConfig& c) {
    r.number(run, "cycles", c.cycles);
    r.number(run, "batch_size", c.batch_size);
    if (run.get("init_size") != nullptr) {
        std::size_t m = 0;
        r.number(run, "init_size", m);
        c.init_size = m;
    }
    r.number(run, "beta", c.beta);
    r.number(run, "temperature", c.temperature);
    r.number(run, "kappa", c.kappa);
    r.number(run, "top_fraction_for_ea", c.top_fraction_for_ea);
    r.number(run, "recall_percentile", c.recall_percentile);
    r.boolean(run, "track_surrogate_metrics", c.track_surrogate_metrics);
    std::string agg = to_string(c.agg);
    r.string(run, "agg", agg);
    c.agg = parse_aggregation(agg);

    if (const auto* gp = r.table(run, "gp")) {
        if (const auto* node = gp->get("lengthscale")) {
            if (auto v = node->value<double>()) {
                c.gp.lengthscale = *v;
            } else if (node->value<std::string>() == std::optional<std::string>("median-heuristic")) {
                c.gp.lengthscale.reset();
            } else {
                r.fail("run.gp.lengthscale must be a number or \"median-heuristic\"");
            }
        }
        r.number(*gp, "signal_variance", c.gp.signal_variance);
        r.number(*gp, "noise_variance", c.gp.noise_variance);
        r.number(*gp, "jitter", c.gp.jitter);
    }
    if (const auto* e = r.table(run, "ensemble")) {
        auto& t = c.ensemble;
        r.number(*e, "members", t.members);
        r.number(*e, "hidden_width", t.hidden_width);
        r.number(*e, "depth", t.depth);
        r.number(*e, "learning_rate", t.learning_rate);
        r.number(*e, "weight_decay", t.weight_decay);
        r.number(*e, "max_epochs", t.max_epochs);
        r.number(*e, "patience", t.patience);
        r.number(*e, "batch_size", t.batch_size);
        r.number(*e, "observation_noise_sd", t.observation_noise_sd);
        r.number(*e, "validation_fraction", t.validation_fraction);
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

bool looks_like_path(const std::string& prior) {
    return prior.find('/') != std::string::npos || std::filesystem::path(prior).extension() == ".gmt";
}

}  // namespace

std::vector<RunConfig> ExperimentSpec::grid() const {
    std::vector<RunConfig> out;
    for (const auto& a : acquisitions)
        for (const auto& p : priors)
            for (const auto& s : surrogates)
                for (const auto& f : features) {
                    RunConfig c = base;
                    c.acquisition = parse_acquisition(a);
                    c.prior = p;
                    c.surrogate = parse_surrogate(s);
                    c.features = f;
                    out.push_back(std::move(c));
                }
    return out;
}

void ExperimentSpec::validate() const {
    if (data.has_value() == synthetic.has_value()) {
        throw std::invalid_argument("experiment spec needs exactly one of [data] or [synthetic]");
    }
    if (acquisitions.empty() || priors.empty() || surrogates.empty() || features.empty()) {
        throw std::invalid_argument("experiment grid must be non-empty in every dimension");
    }
    if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw std::invalid_argument("experiment seeds must be distinct");
    }
    if (!(eval.test_fraction > 0.0 && eval.test_fraction < 1.0)) {
        throw std::invalid_argument("eval.test_fraction must be in (0, 1)");
    }
    for (double q : eval.fractions)
        if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("eval.fractions must lie in (0, 1]");
    if (data && data->embeddings.empty()) throw std::invalid_argument("[data.embeddings] needs at least one modality");
    for (auto c : grid()) {
        // Prior names are resolved against loaded data later; only the shape is checked here.
        c.seed = 0;
        if (c.acquisition == Acquisition::greedy_ea && !c.prior_enabled()) {
            throw std::invalid_argument("grid pairs greedy-ea with prior 'none'");
        }
        c.validate();
    }
}

ExperimentSpec parse_experiment(const std::string& toml_text, const std::filesystem::path& base_dir,
                                const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        const auto& where = e.source().begin;
        throw ParseError(source, where.line, where.column, std::string(e.description()));
    }
    TomlReader r(root, source);

    ExperimentSpec spec;
    spec.base_dir = base_dir;
    spec.hash = hex64(fnv1a64(toml_text));

    if (const auto* syn = r.table(root, "synthetic")) {
        SynthParams p;
        r.number(*syn, "n_genes", p.n_genes);
        r.number(*syn, "d", p.d);
        r.number(*syn, "n_pathways", p.n_pathways);
        r.number(*syn, "signal_pathways", p.signal_pathways);
        r.number(*syn, "noise_sd", p.noise_sd);
        r.number(*syn, "seed", p.seed);
        spec.synthetic = p;
    }
    if (const auto* data = r.table(root, "data")) {
        DataPaths d;
        std::string labels;
        r.string(*data, "labels", labels);
        if (labels.empty()) r.fail("data.labels is required");
        d.labels = resolve(base_dir, labels);
        if (const auto* emb = r.table(*data, "embeddings")) {
            for (const auto& [key, node] : *emb) {
                const auto v = node.value<std::string>();
                if (!v) r.fail("data.embeddings values must be file paths");
                d.embeddings.emplace(std::string(key.str()), resolve(base_dir, *v));
            }
        }
        if (const auto* pw = r.table(*data, "pathways")) {
            for (const auto& [key, node] : *pw) {
                const auto v = node.value<std::string>();
                if (!v) r.fail("data.pathways values must be file paths");
                d.pathways.emplace(std::string(key.str()), resolve(base_dir, *v));
            }
        }
        spec.data = std::move(d);
    }
    if (const auto* run = r.table(root, "run")) read_run_defaults(r, *run, spec.base);
    if (const auto* grid = r.table(root, "grid")) {
        r.strings(*grid, "acquisitions", spec.acquisitions);
        r.strings(*grid, "priors", spec.priors);
        r.strings(*grid, "surrogates", spec.surrogates);
        r.strings(*grid, "features", spec.features);
    }
    r.numbers(root, "seeds", spec.seeds);
    if (const auto* ev = r.table(root, "eval")) {
        r.number(*ev, "test_fraction", spec.eval.test_fraction);
        r.numbers(*ev, "fractions", spec.eval.fractions);
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open spec file");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_experiment(text.str(), path.parent_path(), path.string());
}

PathwayDB LoadedData::resolve_prior(const std::string& prior, const std::filesystem::path& base_dir) const {
    if (prior == "none") return {};
    const auto it = pathways.find(prior);
    if (it != pathways.end()) return it->second;
    if (looks_like_path(prior)) {
        const std::set<GeneId> universe(pool.ids().begin(), pool.ids().end());
        return parse_gmt(resolve(base_dir, prior)).restricted_to(universe);
    }
    throw std::invalid_argument("unknown prior '" + prior + "'");
}

LoadedData load_data(const ExperimentSpec& spec) {
    if (spec.synthetic) {
        auto [pool, db] = synth_benchmark(*spec.synthetic);
        LoadedData out{std::move(pool), {}};
        out.pathways.emplace("synthetic", std::move(db));
        return out;
    }
    const auto& d = *spec.data;
    std::vector<EmbeddingTable> tables;
    for (const auto& [name, path] : d.embeddings) tables.push_back(load_embeddings(path, name));
    const auto labels = load_labels(d.labels);
    auto [pool, unused] = build_pool(tables, labels, PathwayDB{});
    const std::set<GeneId> universe(pool.ids().begin(), pool.ids().end());
    LoadedData out{std::move(pool), {}};
    for (const auto& [name, path] : d.pathways) out.pathways.emplace(name, parse_gmt(path).restricted_to(universe));
    return out;
}

}  // namespace biobo
