#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "biobo/acquire.hpp"
#include "biobo/enrich.hpp"
#include "biobo/genepool.hpp"
#include "biobo/surrogate.hpp"

namespace biobo {

enum class SurrogateKind { gp, ensemble };

SurrogateKind parse_surrogate(const std::string& name);
std::string to_string(SurrogateKind kind);

/// Features name meaning "L2-normalize and concatenate every modality".
inline constexpr const char* fusion_features = "fusion";

struct RunConfig {
    std::size_t cycles = 20;
    std::size_t batch_size = 32;
    std::optional<std::size_t> init_size;  // defaults to batch_size
    Acquisition acquisition = Acquisition::ucb;
    std::string prior = "none";  // pathway database name, or "none"
    double beta = 1.0;
    double temperature = 0.1;
    double kappa = 1.0;
    double top_fraction_for_ea = 0.10;
    double recall_percentile = 0.01;
    SurrogateKind surrogate = SurrogateKind::gp;
    Aggregation agg = Aggregation::mean;
    std::string features = fusion_features;  // a modality name or "fusion"
    std::uint64_t seed = 0;
    bool track_surrogate_metrics = false;
    GPConfig gp;
    EnsembleConfig ensemble;

    std::size_t initial_size() const noexcept { return init_size.value_or(batch_size); }
    bool prior_enabled() const noexcept { return prior != "none"; }
    void validate() const;

    /// Short human-readable name, e.g. `bio-ucb[hm]|gp|fusion`.
    std::string label() const;
    /// Stable hash of every field except the seed.
    std::string hash() const;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricRecord& metrics);

struct CycleRecord {
    std::size_t cycle = 0;
    std::vector<GeneId> batch;
    std::vector<double> batch_values;  // oracle labels of the batch
    std::size_t labels_used = 0;       // |labeled| after this cycle
    double cumulative_recall = 0.0;
    std::size_t n_tested_pathways = 0;
    std::size_t n_significant_pathways = 0;
    double prior_max_min_ratio = 1.0;
    double regret_factor = 1.0;
    std::optional<MetricRecord> surrogate_metrics;
};

nlohmann::json to_json(const CycleRecord& record);

struct RunResult {
    RunConfig config;
    std::vector<CycleRecord> records;  // records[0] is the initial design
    bool exhausted = false;            // pool ran out before `cycles` completed

    double final_recall() const { return records.empty() ? 0.0 : records.back().cumulative_recall; }
    std::size_t labels_used() const { return records.empty() ? 0 : records.back().labels_used; }
    std::size_t cycles_completed() const { return records.empty() ? 0 : records.size() - 1; }
};

/// Top ceil(percentile * |pool|) genes by true label; ties by id.
std::vector<GeneId> true_topk(const GenePool& pool, double percentile);

double cumulative_topk_recall(const std::vector<GeneId>& labeled, const std::vector<GeneId>& topk);

/// (max pi / min pi)^(beta / labeled_count).
double regret_factor(const PriorWeights& prior, double beta, std::size_t labeled_count);

/// Features fed to the surrogate for `config.features`.
Eigen::MatrixXd run_features(const GenePool& pool, const std::string& features);

/// One BO run over the pool. Deterministic given the config.
RunResult run(const GenePool& pool, const PathwayDB& db, const RunConfig& config);

/// Labels spent when recall first reaches `target`; nullopt if never.
std::optional<std::size_t> labels_to_reach(const RunResult& result, double target);

/// 1 - labels(a) / labels(b) at `target` recall; nullopt ("unreached") if either run never gets there.
std::optional<double> labeling_efficiency(const RunResult& a, const RunResult& b, double target);
std::optional<double> labeling_efficiency(std::optional<std::size_t> labels_a, std::optional<std::size_t> labels_b);

/// One JSON object per cycle, each carrying the run's label, hash, seed and full config.
void write_jsonl(std::ostream& out, const RunResult& result);
/// `config_hash,seed,final_recall,cycles,labels_used`.
std::string summary_csv_row(const RunResult& result);
inline constexpr const char* summary_csv_header = "config_hash,seed,final_recall,cycles,labels_used";

}  // namespace biobo
