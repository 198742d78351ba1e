#include "biobo/enrich.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace biobo {

namespace {

double log_choose(long long n, long long k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

ContingencyTable ContingencyTable::from_counts(long long universe, long long pathway_size, long long sample_size,
                                               long long overlap) {
    ContingencyTable t{overlap, sample_size - overlap, pathway_size - overlap,
                       universe - sample_size - pathway_size + overlap};
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) {
        throw std::invalid_argument("inconsistent contingency counts (G=" + std::to_string(universe) +
                                    ", P=" + std::to_string(pathway_size) + ", S=" + std::to_string(sample_size) +
                                    ", a=" + std::to_string(overlap) + ")");
    }
    return t;
}

double hypergeom_p(long long universe, long long pathway_size, long long sample_size, long long overlap) {
    if (universe < 0 || pathway_size < 0 || sample_size < 0 || overlap < 0) {
        throw std::invalid_argument("hypergeom_p: counts must be non-negative");
    }
    if (pathway_size > universe || sample_size > universe) {
        throw std::invalid_argument("hypergeom_p: pathway and sample sizes cannot exceed the universe");
    }
    const long long upper = std::min(pathway_size, sample_size);
    if (overlap > upper) throw std::invalid_argument("hypergeom_p: overlap exceeds min(pathway, sample)");
    const long long lower = std::max(0LL, sample_size + pathway_size - universe);
    if (overlap <= lower) return 1.0;

    const double log_total = log_choose(universe, sample_size);
    std::vector<double> terms;
    terms.reserve(static_cast<std::size_t>(upper - overlap + 1));
    for (long long i = overlap; i <= upper; ++i) {
        terms.push_back(log_choose(pathway_size, i) + log_choose(universe - pathway_size, sample_size - i) -
                        log_total);
    }
    const double peak = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - peak);
    const double log_p = peak + std::log(sum);
    const double p = std::exp(log_p);
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

double odds_ratio(const ContingencyTable& t) {
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) throw std::invalid_argument("odds_ratio: negative cell");
    double a = static_cast<double>(t.a);
    double b = static_cast<double>(t.b);
    double c = static_cast<double>(t.c);
    double d = static_cast<double>(t.d);
    if (t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0) {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
    }
    return (a * d) / (b * c);
}

std::vector<double> bonferroni(const std::vector<double>& p_values) {
    const auto m = static_cast<double>(p_values.size());
    std::vector<double> out;
    out.reserve(p_values.size());
    for (double p : p_values) {
        if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("bonferroni: p-values must lie in (0, 1]");
        out.push_back(std::min(1.0, p * m));
    }
    return out;
}

double combined_score(double odds, double p_value) {
    if (!(odds >= 0.0)) throw std::invalid_argument("combined_score: odds ratio must be non-negative");
    if (!(p_value > 0.0 && p_value <= 1.0)) throw std::invalid_argument("combined_score: p-value must lie in (0, 1]");
    // -0 * ln(p) and -o * ln(1) would otherwise print as -0.
    const double c = -odds * std::log(p_value);
    return c == 0.0 ? 0.0 : c;
}

std::size_t EnrichmentTable::num_significant(double alpha) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [alpha](const EnrichmentRow& r) { return r.p_adjusted < alpha; }));
}

EnrichmentTable run_enrichment(const std::vector<GeneId>& sample, const std::set<GeneId>& universe,
                               const PathwayDB& db) {
    if (sample.empty()) throw std::invalid_argument("run_enrichment: empty gene set");
    const std::unordered_set<GeneId> s(sample.begin(), sample.end());
    if (s.size() != sample.size()) throw std::invalid_argument("run_enrichment: gene set contains duplicates");
    for (const auto& g : s) {
        if (universe.count(g) == 0) throw std::invalid_argument("run_enrichment: gene '" + g + "' is not in the universe");
    }

    EnrichmentTable table;
    table.universe_size = universe.size();
    table.sample_size = s.size();
    const auto big_g = static_cast<long long>(universe.size());
    const auto big_s = static_cast<long long>(s.size());

    for (const auto& [name, genes] : db.pathways()) {
        long long overlap = 0;
        for (const auto& g : genes) {
            if (universe.count(g) == 0) {
                throw std::invalid_argument("run_enrichment: pathway '" + name + "' contains gene '" + g +
                                            "' outside the universe; restrict the database first");
            }
            if (s.count(g) != 0) ++overlap;
        }
        if (overlap == 0) {
            ++table.skipped_zero_overlap;
            continue;
        }
        const auto size = static_cast<long long>(genes.size());
        EnrichmentRow row;
        row.pathway = name;
        row.overlap = overlap;
        row.pathway_size = size;
        row.p_value = hypergeom_p(big_g, size, big_s, overlap);
        row.odds_ratio = odds_ratio(ContingencyTable::from_counts(big_g, size, big_s, overlap));
        row.combined_score = combined_score(row.odds_ratio, row.p_value);
        table.rows.push_back(std::move(row));
    }

    std::vector<double> raw;
    raw.reserve(table.rows.size());
    for (const auto& r : table.rows) raw.push_back(r.p_value);
    const auto adjusted = bonferroni(raw);
    for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].p_adjusted = adjusted[i];

    std::sort(table.rows.begin(), table.rows.end(), [](const EnrichmentRow& x, const EnrichmentRow& y) {
        if (x.combined_score != y.combined_score) return x.combined_score > y.combined_score;
        return x.pathway < y.pathway;
    });
    return table;
}

EnrichmentTable run_enrichment(const std::vector<GeneId>& sample, const GenePool& pool, const PathwayDB& db) {
    const std::set<GeneId> universe(pool.ids().begin(), pool.ids().end());
    return run_enrichment(sample, universe, db);
}

void write_enrichment_csv(std::ostream& out, const EnrichmentTable& table, bool significant_only) {
    out << "pathway,overlap,pathway_size,p_value,p_adjusted,odds_ratio,combined_score\n";
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& r : table.rows) {
        if (significant_only && !(r.p_adjusted < significance_level)) continue;
        out << r.pathway << ',' << r.overlap << ',' << r.pathway_size << ',' << r.p_value << ',' << r.p_adjusted
            << ',' << r.odds_ratio << ',' << r.combined_score << '\n';
    }
    out.precision(old_precision);
}

std::vector<GeneId> top_fraction(const std::map<GeneId, double>& labeled, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("top_fraction: fraction must be in (0, 1]");
    if (labeled.empty()) throw std::invalid_argument("top_fraction: no labeled genes");
    std::vector<GeneId> ids;
    std::vector<double> values;
    ids.reserve(labeled.size());
    values.reserve(labeled.size());
    for (const auto& [id, v] : labeled) {
        ids.push_back(id);
        values.push_back(v);
    }
    std::vector<GeneId> out;
    for (auto i : top_k_indices(values, ids, ceil_count(fraction, ids.size()))) out.push_back(ids[i]);
    return out;
}

std::vector<GeneId> top_fraction(const PoolState& state, double fraction) {
    return top_fraction(state.labeled(), fraction);
}

Aggregation parse_aggregation(const std::string& name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "max") return Aggregation::max;
    throw std::invalid_argument("unknown aggregation '" + name + "' (expected mean or max)");
}

std::string to_string(Aggregation agg) { return agg == Aggregation::mean ? "mean" : "max"; }

double logit(double p) { return std::log(p / (1.0 - p)); }

bool PriorWeights::is_uniform() const {
    return std::all_of(prob.begin(), prob.end(), [&](double p) { return p == prob.front(); });
}

double PriorWeights::max_min_ratio() const {
    if (prob.empty()) return 1.0;
    const auto [lo, hi] = std::minmax_element(prob.begin(), prob.end());
    return *hi / *lo;
}

PriorWeights build_prior(const std::vector<GeneId>& unlabeled, const EnrichmentTable& table, const PathwayDB& db,
                         double temperature, Aggregation agg) {
    const auto u = unlabeled.size();
    if (u < 2) throw std::invalid_argument("build_prior: needs at least two unlabeled genes");
    if (!(temperature > 0.0)) throw std::invalid_argument("build_prior: temperature must be positive");

    std::unordered_map<GeneId, std::size_t> position;
    position.reserve(u);
    for (std::size_t i = 0; i < u; ++i) {
        if (!position.emplace(unlabeled[i], i).second) {
            throw std::invalid_argument("build_prior: duplicate unlabeled gene '" + unlabeled[i] + "'");
        }
    }

    std::vector<double> total(u, 0.0);
    std::vector<double> best(u, 0.0);
    std::vector<std::size_t> count(u, 0);
    PriorWeights prior;
    for (const auto& row : table.rows) {
        if (!(row.p_adjusted < significance_level)) continue;
        ++prior.significant_pathways;
        for (const auto& g : db.genes(row.pathway)) {
            const auto it = position.find(g);
            if (it == position.end()) continue;
            const auto i = it->second;
            total[i] += row.combined_score;
            best[i] = count[i] == 0 ? row.combined_score : std::max(best[i], row.combined_score);
            ++count[i];
        }
    }

    const double base = logit(1.0 / static_cast<double>(u));
    prior.ids = unlabeled;
    prior.score.resize(u);
    for (std::size_t i = 0; i < u; ++i) {
        double aggregated = 0.0;
        if (count[i] > 0) aggregated = agg == Aggregation::mean ? total[i] / static_cast<double>(count[i]) : best[i];
        prior.score[i] = base + aggregated / temperature;
    }

    if (prior.significant_pathways == 0) {
        prior.prob.assign(u, 1.0 / static_cast<double>(u));
        return prior;
    }

    const double peak = *std::max_element(prior.score.begin(), prior.score.end());
    prior.prob.resize(u);
    double sum = 0.0;
    for (std::size_t i = 0; i < u; ++i) {
        prior.prob[i] = std::exp(prior.score[i] - peak);
        sum += prior.prob[i];
    }
    constexpr double floor = std::numeric_limits<double>::min();
    double floored_sum = 0.0;
    for (auto& p : prior.prob) {
        p = std::max(p / sum, floor);
        floored_sum += p;
    }
    for (auto& p : prior.prob) p /= floored_sum;
    return prior;
}

PriorWeights build_prior(const PoolState& state, const EnrichmentTable& table, const PathwayDB& db,
                         double temperature, Aggregation agg) {
    const std::vector<GeneId> unlabeled(state.unlabeled().begin(), state.unlabeled().end());
    return build_prior(unlabeled, table, db, temperature, agg);
}

}  // namespace biobo
