#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "biobo/genepool.hpp"
#include "biobo/loop.hpp"

namespace biobo {

/// On-disk inputs for a real-data experiment. Paths are resolved against the
/// directory of the spec file.
struct DataPaths {
    std::map<std::string, std::filesystem::path> embeddings;  // modality -> CSV
    std::filesystem::path labels;
    std::map<std::string, std::filesystem::path> pathways;  // prior name -> GMT
};

struct EvalSettings {
    double test_fraction = 0.2;
    std::vector<double> fractions{0.01, 0.05, 0.10};
};

/// Parsed experiment spec (TOML). Exactly one of `data` / `synthetic` is set.
struct ExperimentSpec {
    std::optional<DataPaths> data;
    std::optional<SynthParams> synthetic;

    RunConfig base;  // scalar defaults shared by every grid cell
    std::vector<std::string> acquisitions{"ucb"};
    std::vector<std::string> priors{"none"};
    std::vector<std::string> surrogates{"gp"};
    std::vector<std::string> features{fusion_features};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6};
    EvalSettings eval;

    std::filesystem::path base_dir;
    std::string hash;  // FNV-1a of the spec file bytes

    /// Grid configs (seed left at the base value), in acquisition, prior,
    /// surrogate, features order.
    std::vector<RunConfig> grid() const;
    void validate() const;
};

ExperimentSpec load_experiment(const std::filesystem::path& path);
ExperimentSpec parse_experiment(const std::string& toml_text, const std::filesystem::path& base_dir,
                                const std::string& source = "<string>");

/// Pool and pathway databases for an experiment. The synthetic generator's
/// pathways are registered under the name "synthetic".
struct LoadedData {
    GenePool pool;
    std::map<std::string, PathwayDB> pathways;  // restricted to the pool

    /// Database for a prior name: a registered name, "none" (empty), or a GMT path.
    PathwayDB resolve_prior(const std::string& prior, const std::filesystem::path& base_dir) const;
};

LoadedData load_data(const ExperimentSpec& spec);

}  // namespace biobo
