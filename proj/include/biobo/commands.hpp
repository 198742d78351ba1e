#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biobo/experiment.hpp"

namespace biobo::cli {

struct GlobalOptions {
    /// Output root; falls back to $BIOBO_OUT, then ./biobo_out.
    std::optional<std::filesystem::path> out_dir;
    std::size_t jobs = 1;
    /// Replaces the spec's seed list with this single seed.
    std::optional<std::uint64_t> seed;

    std::filesystem::path output_root() const;
};

/// Creates `<root>/<command>-<UTC timestamp>[-k]`, never reusing an existing directory.
std::filesystem::path make_output_dir(const std::filesystem::path& root, const std::string& command);

/// Minimal CSV table for files this tool writes: `#` lines are comments.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws when missing
};
CsvTable read_csv(const std::filesystem::path& path, char sep = ',');

/// Runs the grid x seeds. Writes runs/*.jsonl, summary.csv and aggregate.csv.
std::filesystem::path cmd_run(const std::filesystem::path& spec_path, const GlobalOptions& opts);

struct EnrichOptions {
    std::filesystem::path labels;
    std::filesystem::path gmt;
    double fraction = 0.1;
    std::optional<std::filesystem::path> run_file;  // draw S from a run's labeled genes
    bool all_rows = false;                          // include non-significant pathways
};

/// Writes enrichment.csv for the top fraction of the labeled genes.
std::filesystem::path cmd_enrich(const EnrichOptions& options, const GlobalOptions& opts);

/// Trains each surrogate/features pair on a stratified split; writes metrics.csv.
std::filesystem::path cmd_eval_surrogate(const std::filesystem::path& spec_path, const GlobalOptions& opts);

enum class CorrelationMethod { spearman, pearson };
CorrelationMethod parse_correlation_method(const std::string& name);

/// Joins recall and metrics CSVs on (surrogate_config, seed); writes correlation.csv.
std::filesystem::path cmd_correlate(const std::filesystem::path& recall_csv, const std::filesystem::path& metrics_csv,
                                    CorrelationMethod method, const GlobalOptions& opts);

/// Long-format `cycle<TAB>config<TAB>mean_recall<TAB>sem` from a run directory.
std::filesystem::path cmd_report(const std::filesystem::path& run_dir, const GlobalOptions& opts);

/// Per-(config, cycle) aggregate over seeds, as written to aggregate.csv and plot_data.tsv.
struct AggregateRow {
    std::string config_hash;
    std::string config;
    std::size_t cycle = 0;
    std::size_t n_runs = 0;
    double mean_recall = 0.0;
    double sem_recall = 0.0;
    double mean_labels = 0.0;
};

/// Reads every `*.jsonl` under `dir` (recursively) and aggregates recall by config and cycle.
std::vector<AggregateRow> aggregate_jsonl(const std::filesystem::path& dir);

}  // namespace biobo::cli
