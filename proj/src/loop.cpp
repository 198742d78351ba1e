#include "biobo/loop.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace biobo {

SurrogateKind parse_surrogate(const std::string& name) {
    if (name == "gp") return SurrogateKind::gp;
    if (name == "ensemble") return SurrogateKind::ensemble;
    throw std::invalid_argument("unknown surrogate '" + name + "' (expected gp or ensemble)");
}

std::string to_string(SurrogateKind kind) { return kind == SurrogateKind::gp ? "gp" : "ensemble"; }

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (initial_size() < 1) throw std::invalid_argument("init_size must be >= 1");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
    if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be non-negative");
    if (!(top_fraction_for_ea > 0.0 && top_fraction_for_ea <= 1.0)) {
        throw std::invalid_argument("top_fraction_for_ea must be in (0, 1]");
    }
    if (!(recall_percentile > 0.0 && recall_percentile <= 1.0)) {
        throw std::invalid_argument("recall_percentile must be in (0, 1]");
    }
    if (acquisition == Acquisition::greedy_ea && !prior_enabled()) {
        throw std::invalid_argument("greedy-ea needs a pathway prior");
    }
    if (prior.empty()) throw std::invalid_argument("prior must be 'none' or a pathway database name");
    gp.validate();
    if (surrogate == SurrogateKind::ensemble) ensemble.validate();
}

std::string RunConfig::label() const {
    std::string name = to_string(acquisition);
    const bool model_based = acquisition == Acquisition::ei || acquisition == Acquisition::ucb ||
                             acquisition == Acquisition::ts;
    if (prior_enabled() && model_based) name = "bio-" + name;
    if (prior_enabled()) name += "[" + prior + "]";
    return name + "|" + to_string(surrogate) + "|" + features;
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json gp = {{"signal_variance", c.gp.signal_variance},
                         {"noise_variance", c.gp.noise_variance},
                         {"jitter", c.gp.jitter}};
    gp["lengthscale"] = c.gp.lengthscale ? nlohmann::json(*c.gp.lengthscale) : nlohmann::json("median-heuristic");
    const auto& e = c.ensemble;
    return {{"cycles", c.cycles},
            {"batch_size", c.batch_size},
            {"init_size", c.initial_size()},
            {"acquisition", to_string(c.acquisition)},
            {"prior", c.prior},
            {"beta", c.beta},
            {"temperature", c.temperature},
            {"kappa", c.kappa},
            {"top_fraction_for_ea", c.top_fraction_for_ea},
            {"recall_percentile", c.recall_percentile},
            {"surrogate", to_string(c.surrogate)},
            {"agg", to_string(c.agg)},
            {"features", c.features},
            {"seed", c.seed},
            {"track_surrogate_metrics", c.track_surrogate_metrics},
            {"gp", gp},
            {"ensemble",
             {{"members", e.members},
              {"hidden_width", e.hidden_width},
              {"depth", e.depth},
              {"learning_rate", e.learning_rate},
              {"weight_decay", e.weight_decay},
              {"max_epochs", e.max_epochs},
              {"patience", e.patience},
              {"batch_size", e.batch_size},
              {"observation_noise_sd", e.observation_noise_sd},
              {"validation_fraction", e.validation_fraction}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.cycles = j.value("cycles", c.cycles);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("init_size")) c.init_size = j.at("init_size").get<std::size_t>();
    c.acquisition = parse_acquisition(j.value("acquisition", to_string(c.acquisition)));
    c.prior = j.value("prior", c.prior);
    c.beta = j.value("beta", c.beta);
    c.temperature = j.value("temperature", c.temperature);
    c.kappa = j.value("kappa", c.kappa);
    c.top_fraction_for_ea = j.value("top_fraction_for_ea", c.top_fraction_for_ea);
    c.recall_percentile = j.value("recall_percentile", c.recall_percentile);
    c.surrogate = parse_surrogate(j.value("surrogate", to_string(c.surrogate)));
    c.agg = parse_aggregation(j.value("agg", to_string(c.agg)));
    c.features = j.value("features", c.features);
    c.seed = j.value("seed", c.seed);
    c.track_surrogate_metrics = j.value("track_surrogate_metrics", c.track_surrogate_metrics);
    if (j.contains("gp")) {
        const auto& g = j.at("gp");
        c.gp.signal_variance = g.value("signal_variance", c.gp.signal_variance);
        c.gp.noise_variance = g.value("noise_variance", c.gp.noise_variance);
        c.gp.jitter = g.value("jitter", c.gp.jitter);
        if (g.contains("lengthscale") && g.at("lengthscale").is_number()) c.gp.lengthscale = g.at("lengthscale").get<double>();
    }
    if (j.contains("ensemble")) {
        const auto& e = j.at("ensemble");
        auto& t = c.ensemble;
        t.members = e.value("members", t.members);
        t.hidden_width = e.value("hidden_width", t.hidden_width);
        t.depth = e.value("depth", t.depth);
        t.learning_rate = e.value("learning_rate", t.learning_rate);
        t.weight_decay = e.value("weight_decay", t.weight_decay);
        t.max_epochs = e.value("max_epochs", t.max_epochs);
        t.patience = e.value("patience", t.patience);
        t.batch_size = e.value("batch_size", t.batch_size);
        t.observation_noise_sd = e.value("observation_noise_sd", t.observation_noise_sd);
        t.validation_fraction = e.value("validation_fraction", t.validation_fraction);
    }
    return c;
}

std::string RunConfig::hash() const {
    auto j = to_json(*this);
    j.erase("seed");
    return hex64(fnv1a64(j.dump()));
}

nlohmann::json to_json(const MetricRecord& m) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& t : m.top) {
        top.push_back({{"fraction", t.fraction}, {"count", t.count}, {"ll", t.log_likelihood}, {"rmse", t.rmse}});
    }
    return {{"ll", m.log_likelihood}, {"rmse", m.rmse}, {"top", top}};
}

nlohmann::json to_json(const CycleRecord& r) {
    nlohmann::json j = {{"cycle", r.cycle},
                        {"batch", r.batch},
                        {"batch_values", r.batch_values},
                        {"labels_used", r.labels_used},
                        {"cumulative_recall", r.cumulative_recall},
                        {"n_tested_pathways", r.n_tested_pathways},
                        {"n_significant_pathways", r.n_significant_pathways},
                        {"prior_max_min_ratio", r.prior_max_min_ratio},
                        {"regret_factor", r.regret_factor}};
    j["surrogate_metrics"] = r.surrogate_metrics ? to_json(*r.surrogate_metrics) : nlohmann::json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// Evaluation quantities

std::vector<GeneId> true_topk(const GenePool& pool, double percentile) {
    if (!(percentile > 0.0 && percentile <= 1.0)) throw std::invalid_argument("true_topk: percentile must be in (0, 1]");
    return top_genes_by_label(pool, percentile);
}

double cumulative_topk_recall(const std::vector<GeneId>& labeled, const std::vector<GeneId>& topk) {
    if (topk.empty()) throw std::invalid_argument("cumulative_topk_recall: empty top-k set");
    const std::set<GeneId> target(topk.begin(), topk.end());
    const std::set<GeneId> have(labeled.begin(), labeled.end());
    std::size_t hits = 0;
    for (const auto& g : target) hits += have.count(g);
    return static_cast<double>(hits) / static_cast<double>(target.size());
}

double regret_factor(const PriorWeights& prior, double beta, std::size_t labeled_count) {
    if (labeled_count < 1) throw std::invalid_argument("regret_factor: labeled count must be >= 1");
    if (!(beta >= 0.0)) throw std::invalid_argument("regret_factor: beta must be non-negative");
    if (prior.prob.empty()) throw std::invalid_argument("regret_factor: empty prior");
    const double ratio = prior.max_min_ratio();
    if (ratio == 1.0) return 1.0;
    return std::pow(ratio, beta / static_cast<double>(labeled_count));
}

std::optional<std::size_t> labels_to_reach(const RunResult& result, double target) {
    for (const auto& r : result.records)
        if (r.cumulative_recall >= target) return r.labels_used;
    return std::nullopt;
}

std::optional<double> labeling_efficiency(std::optional<std::size_t> labels_a, std::optional<std::size_t> labels_b) {
    if (!labels_a || !labels_b || *labels_b == 0) return std::nullopt;
    return 1.0 - static_cast<double>(*labels_a) / static_cast<double>(*labels_b);
}

std::optional<double> labeling_efficiency(const RunResult& a, const RunResult& b, double target) {
    return labeling_efficiency(labels_to_reach(a, target), labels_to_reach(b, target));
}

Eigen::MatrixXd run_features(const GenePool& pool, const std::string& features) {
    if (features == fusion_features) return fuse(pool, pool.modality_names());
    return pool.modality(features);
}

// ---------------------------------------------------------------------------
// The loop

namespace {

std::unique_ptr<SurrogateModel> fit_surrogate(const RunConfig& config, const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& y, std::uint64_t seed) {
    if (config.surrogate == SurrogateKind::gp) return std::make_unique<GaussianProcess>(x, y, config.gp);
    return std::make_unique<DeepEnsemble>(fit_ensemble(x, y, config.ensemble, seed));
}

}  // namespace

RunResult run(const GenePool& pool, const PathwayDB& db, const RunConfig& config) {
    config.validate();
    const bool model_based = config.acquisition == Acquisition::ei || config.acquisition == Acquisition::ucb ||
                             config.acquisition == Acquisition::ts;
    const std::set<GeneId> universe(pool.ids().begin(), pool.ids().end());
    const PathwayDB pathways = db.restricted_to(universe);
    if (config.prior_enabled() && pathways.empty()) {
        throw DataError("prior '" + config.prior + "' has no pathway overlapping the pool");
    }
    const Eigen::MatrixXd features = model_based ? run_features(pool, config.features) : Eigen::MatrixXd();
    const auto topk = true_topk(pool, config.recall_percentile);

    RunResult result;
    result.config = config;
    PoolState state(pool);

    auto record_batch = [&](CycleRecord& rec, const std::vector<GeneId>& batch) {
        for (const auto& g : batch) {
            const double value = pool.label(g);
            state.label(g, value);
            rec.batch.push_back(g);
            rec.batch_values.push_back(value);
        }
        rec.labels_used = state.num_labeled();
        rec.cumulative_recall = cumulative_topk_recall(state.labeling_order(), topk);
    };

    {
        CycleRecord rec;
        rec.cycle = 0;
        const std::vector<GeneId> all(state.unlabeled().begin(), state.unlabeled().end());
        const auto m = std::min(config.initial_size(), all.size());
        record_batch(rec, random_policy(all, m, derive_seed(config.seed, Stream::initial_design)));
        result.records.push_back(std::move(rec));
    }

    for (std::size_t n = 1; n <= config.cycles; ++n) {
        state.advance_cycle();
        if (state.num_unlabeled() == 0) {
            result.exhausted = true;
            break;
        }
        const std::vector<GeneId> unlabeled(state.unlabeled().begin(), state.unlabeled().end());
        const auto batch_size = std::min(config.batch_size, unlabeled.size());
        if (batch_size < config.batch_size) result.exhausted = true;
        const auto labeled_count = state.num_labeled();

        CycleRecord rec;
        rec.cycle = n;

        std::optional<PriorWeights> prior;
        if (config.prior_enabled() && unlabeled.size() >= 2) {
            const auto sample = top_fraction(state, config.top_fraction_for_ea);
            const auto table = run_enrichment(sample, universe, pathways);
            prior = build_prior(unlabeled, table, pathways, config.temperature, config.agg);
            rec.n_tested_pathways = table.tested();
            rec.n_significant_pathways = prior->significant_pathways;
            rec.prior_max_min_ratio = prior->max_min_ratio();
            rec.regret_factor = regret_factor(*prior, config.beta, labeled_count);
        }

        std::vector<GeneId> batch;
        if (config.acquisition == Acquisition::random) {
            batch = random_policy(unlabeled, batch_size, derive_seed(config.seed, Stream::random_policy, n));
        } else if (config.acquisition == Acquisition::greedy_ea) {
            batch = prior ? greedy_ea_policy(*prior, batch_size)
                          : std::vector<GeneId>(unlabeled.begin(), unlabeled.begin() + static_cast<std::ptrdiff_t>(batch_size));
        } else {
            std::vector<GeneId> labeled_ids;
            Eigen::VectorXd y(static_cast<Eigen::Index>(labeled_count));
            Eigen::Index k = 0;
            for (const auto& [id, value] : state.labeled()) {
                labeled_ids.push_back(id);
                y(k++) = value;
            }
            const Eigen::MatrixXd x_train = pool.rows(features, labeled_ids);
            const Eigen::MatrixXd x_cand = pool.rows(features, unlabeled);

            std::unique_ptr<SurrogateModel> model;
            try {
                model = fit_surrogate(config, x_train, y, derive_seed(config.seed, Stream::surrogate, n));
            } catch (const std::exception& e) {
                throw NumericalError("cycle " + std::to_string(n) + ": surrogate fit failed: " + e.what());
            }

            std::optional<Posterior> posterior;
            if (config.acquisition != Acquisition::ts || config.track_surrogate_metrics) {
                posterior = model->predict(x_cand, unlabeled);
            }
            AcquisitionScores scores;
            switch (config.acquisition) {
                case Acquisition::ei: scores = ei(*posterior, y.maxCoeff()); break;
                case Acquisition::ucb: scores = ucb(*posterior, config.kappa); break;
                default:
                    scores = ts(*model, x_cand, unlabeled, derive_seed(config.seed, Stream::acquisition, n));
                    break;
            }
            if (prior) scores = bio_augment(std::move(scores), *prior, config.beta, labeled_count);
            batch = select_batch(scores, batch_size);

            if (config.track_surrogate_metrics) {
                Eigen::VectorXd truth(static_cast<Eigen::Index>(unlabeled.size()));
                for (std::size_t i = 0; i < unlabeled.size(); ++i) truth(static_cast<Eigen::Index>(i)) = pool.label(unlabeled[i]);
                rec.surrogate_metrics = eval_metrics(*posterior, truth, {0.01, 0.05, 0.10});
            }
        }

        record_batch(rec, batch);
        result.records.push_back(std::move(rec));
        if (state.num_unlabeled() == 0 && n < config.cycles) {
            result.exhausted = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

void write_jsonl(std::ostream& out, const RunResult& result) {
    const auto label = result.config.label();
    const auto hash = result.config.hash();
    const auto config = to_json(result.config);
    for (const auto& r : result.records) {
        auto j = to_json(r);
        j["config"] = label;
        j["run_config"] = config;
        j["config_hash"] = hash;
        j["seed"] = result.config.seed;
        j["exhausted"] = result.exhausted;
        out << j.dump() << '\n';
    }
}

std::string summary_csv_row(const RunResult& result) {
    std::ostringstream s;
    s.precision(17);
    s << result.config.hash() << ',' << result.config.seed << ',' << result.final_recall() << ','
      << result.cycles_completed() << ',' << result.labels_used();
    return s.str();
}

}  // namespace biobo
