#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "biobo/common.hpp"
#include "biobo/genepool.hpp"

namespace biobo {

inline constexpr double significance_level = 0.05;

/// 2x2 overlap table between a gene set S and a pathway P over a universe G.
struct ContingencyTable {
    long long a = 0;  // |S n P|
    long long b = 0;  // |S| - a
    long long c = 0;  // |P| - a
    long long d = 0;  // |G| - |S| - |P| + a

    /// Throws std::invalid_argument when the counts are inconsistent.
    static ContingencyTable from_counts(long long universe, long long pathway_size, long long sample_size,
                                        long long overlap);
};

/// P(X >= overlap) for X ~ Hypergeometric(universe, pathway_size, sample_size),
/// summed in log space. Result lies in (0, 1].
double hypergeom_p(long long universe, long long pathway_size, long long sample_size, long long overlap);

/// (a d) / (b c), with 0.5 added to every cell when any cell is zero.
double odds_ratio(const ContingencyTable& table);

/// min(1, p * m) with m = p_values.size().
std::vector<double> bonferroni(const std::vector<double>& p_values);

/// -odds_ratio * ln(p), natural log of the raw p-value.
double combined_score(double odds, double p_value);

struct EnrichmentRow {
    std::string pathway;
    long long overlap = 0;
    long long pathway_size = 0;
    double p_value = 1.0;
    double p_adjusted = 1.0;
    double odds_ratio = 0.0;
    double combined_score = 0.0;
};

struct EnrichmentTable {
    std::vector<EnrichmentRow> rows;  // combined score descending, ties by name
    std::size_t universe_size = 0;
    std::size_t sample_size = 0;
    /// Pathways in the database that were skipped for zero overlap.
    std::size_t skipped_zero_overlap = 0;

    std::size_t tested() const noexcept { return rows.size(); }
    std::size_t num_significant(double alpha = significance_level) const;
};

/// Over-representation test of `sample` against every pathway in `db`.
/// Pathways with zero overlap are neither reported nor counted for Bonferroni.
EnrichmentTable run_enrichment(const std::vector<GeneId>& sample, const std::set<GeneId>& universe,
                               const PathwayDB& db);
EnrichmentTable run_enrichment(const std::vector<GeneId>& sample, const GenePool& pool, const PathwayDB& db);

/// `pathway,overlap,pathway_size,p_value,p_adjusted,odds_ratio,combined_score`.
/// With `significant_only`, rows with p_adjusted >= 0.05 are omitted.
void write_enrichment_csv(std::ostream& out, const EnrichmentTable& table, bool significant_only = false);

/// The ceil(fraction * |labeled|) labeled genes with the highest observed values; ties by id.
std::vector<GeneId> top_fraction(const PoolState& state, double fraction);
std::vector<GeneId> top_fraction(const std::map<GeneId, double>& labeled, double fraction);

enum class Aggregation { mean, max };

Aggregation parse_aggregation(const std::string& name);
std::string to_string(Aggregation agg);

struct PriorWeights {
    std::vector<GeneId> ids;
    std::vector<double> score;  // s(x)
    std::vector<double> prob;   // pi(x), sums to one, strictly positive
    std::size_t significant_pathways = 0;

    bool is_uniform() const;
    double max_min_ratio() const;
};

/// Softmax prior over the given unlabeled genes from the significant pathways
/// (p_adjusted < 0.05) of an enrichment table. Exactly uniform when nothing is
/// significant. Probabilities that underflow are floored at the smallest
/// normal double before renormalization so every gene keeps positive mass.
PriorWeights build_prior(const std::vector<GeneId>& unlabeled, const EnrichmentTable& table, const PathwayDB& db,
                         double temperature, Aggregation agg);
PriorWeights build_prior(const PoolState& state, const EnrichmentTable& table, const PathwayDB& db,
                         double temperature, Aggregation agg);

/// ln(p / (1 - p)).
double logit(double p);

}  // namespace biobo
