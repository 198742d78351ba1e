#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "biobo/common.hpp"

namespace biobo {

/// Rows of one embedding file, in file order.
struct EmbeddingTable {
    std::string modality;
    std::vector<GeneId> ids;
    Eigen::MatrixXd values;  // ids.size() x d
};

struct LabelTable {
    std::vector<GeneId> ids;
    std::vector<double> values;
};

/// Candidate genes with their embeddings and hidden phenotype labels.
///
/// Ids are kept in ascending lexicographic order; every modality matrix and
/// the label vector follow that order. Index order therefore doubles as the
/// id tie-break order used throughout the library.
class GenePool {
public:
    GenePool(std::vector<GeneId> ids, std::map<std::string, Eigen::MatrixXd> modalities, Eigen::VectorXd labels);

    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<GeneId>& ids() const noexcept { return ids_; }
    const GeneId& id(std::size_t index) const { return ids_.at(index); }
    std::optional<std::size_t> index_of(const GeneId& id) const;
    bool contains(const GeneId& id) const { return index_.count(id) != 0; }

    std::vector<std::string> modality_names() const;
    bool has_modality(const std::string& name) const { return modalities_.count(name) != 0; }
    const Eigen::MatrixXd& modality(const std::string& name) const;
    EmbeddingTable modality_table(const std::string& name) const;

    /// Oracle access. Policies never read these directly.
    const Eigen::VectorXd& labels() const noexcept { return labels_; }
    double label(const GeneId& id) const;
    LabelTable label_table() const;

    /// Rows of `features` for the given ids, in the given order.
    Eigen::MatrixXd rows(const Eigen::MatrixXd& features, const std::vector<GeneId>& ids) const;

private:
    std::vector<GeneId> ids_;
    std::unordered_map<GeneId, std::size_t> index_;
    std::map<std::string, Eigen::MatrixXd> modalities_;
    Eigen::VectorXd labels_;
};

/// Named gene sets over an identifier universe.
class PathwayDB {
public:
    using GeneSet = std::set<GeneId>;

    PathwayDB() = default;

    /// Throws DataError on a duplicate name or an empty gene set.
    void add(const std::string& name, GeneSet genes);

    std::size_t size() const noexcept { return pathways_.size(); }
    bool empty() const noexcept { return pathways_.empty(); }
    const std::map<std::string, GeneSet>& pathways() const noexcept { return pathways_; }
    const GeneSet& genes(const std::string& name) const;
    bool contains(const std::string& pathway, const GeneId& gene) const;

    /// Drops genes outside `universe`, then drops pathways left empty.
    PathwayDB restricted_to(const std::set<GeneId>& universe) const;

    std::optional<std::size_t> universe_hint;

private:
    std::map<std::string, GeneSet> pathways_;
};

/// Labeled/unlabeled partition of a pool. Single writer: the BO loop.
class PoolState {
public:
    explicit PoolState(const GenePool& pool);

    /// Moves `id` from unlabeled to labeled with the observed value.
    void label(const GeneId& id, double value);
    void advance_cycle() noexcept { ++cycle_; }

    const std::map<GeneId, double>& labeled() const noexcept { return labeled_; }
    const std::set<GeneId>& unlabeled() const noexcept { return unlabeled_; }
    /// Labeled ids in the order they were labeled.
    const std::vector<GeneId>& labeling_order() const noexcept { return order_; }
    std::size_t cycle() const noexcept { return cycle_; }
    std::size_t num_labeled() const noexcept { return labeled_.size(); }
    std::size_t num_unlabeled() const noexcept { return unlabeled_.size(); }

private:
    std::map<GeneId, double> labeled_;
    std::set<GeneId> unlabeled_;
    std::vector<GeneId> order_;
    std::size_t cycle_ = 0;
};

/// Reads `gene_id,f0,...,f{d-1}` CSV.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const std::string& modality_name);
EmbeddingTable read_embeddings(std::istream& in, const std::string& modality_name, const std::string& source = "<stream>");

/// Reads `gene_id,value` CSV.
LabelTable load_labels(const std::filesystem::path& path);
LabelTable read_labels(std::istream& in, const std::string& source = "<stream>");

/// Reads `name<TAB>description<TAB>gene...` lines. Blank lines are skipped.
PathwayDB parse_gmt(const std::filesystem::path& path);
PathwayDB read_gmt(std::istream& in, const std::string& source = "<stream>");

void write_embeddings(std::ostream& out, const EmbeddingTable& table);
void write_labels(std::ostream& out, const LabelTable& table);
void write_gmt(std::ostream& out, const PathwayDB& db);

/// Intersects modalities and labels; restricts pathways to the resulting pool.
std::pair<GenePool, PathwayDB> build_pool(const std::vector<EmbeddingTable>& modalities, const LabelTable& labels,
                                          const PathwayDB& pathways);

/// Row-wise L2 normalization per modality, concatenated in the given order.
/// All-zero rows stay zero.
Eigen::MatrixXd fuse(const GenePool& pool, const std::vector<std::string>& modality_names);

struct SynthParams {
    std::size_t n_genes = 1000;
    std::size_t d = 16;
    std::size_t n_pathways = 20;
    std::size_t signal_pathways = 1;
    double noise_sd = 0.3;
    std::uint64_t seed = 0;
};

/// Clustered synthetic pool: one pathway per cluster, labels boosted by +2 in
/// the signal clusters. Embeddings are stored under the modality "synthetic".
/// Signal pathway names are recorded in `signal_pathway_names` when non-null.
std::pair<GenePool, PathwayDB> synth_benchmark(const SynthParams& params,
                                               std::vector<std::string>* signal_pathway_names = nullptr);

inline constexpr double synth_cluster_jitter_sd = 0.3;
inline constexpr double synth_signal_bonus = 2.0;

struct Split {
    std::vector<GeneId> train;
    std::vector<GeneId> test;
};

/// Seeded random split; the test set receives round(test_fraction * n_top)
/// of the top-10% genes by label, and the remainder of its quota from the rest.
Split train_test_split(const GenePool& pool, double test_fraction, std::uint64_t seed);

/// Top ceil(fraction * |pool|) genes by true label; ties by id.
std::vector<GeneId> top_genes_by_label(const GenePool& pool, double fraction);

}  // namespace biobo
