#include "biobo/acquire.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace biobo {

void AcquisitionScores::validate() const {
    if (ids.size() != raw.size()) throw DataError("acquisition ids/raw length mismatch");
    if (weighted && weighted->size() != raw.size()) throw DataError("acquisition weighted length mismatch");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(raw) || (weighted && !finite(*weighted))) throw DataError("acquisition scores must be finite");
}

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double sd, double y_best) noexcept {
    const double z = (mean - y_best) / sd;
    return std::max(0.0, sd * (z * normal_cdf(z) + normal_pdf(z)));
}

AcquisitionScores ei(const Posterior& posterior, double y_best) {
    posterior.validate();
    AcquisitionScores out{posterior.ids, std::vector<double>(posterior.size()), std::nullopt};
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.raw[i] = expected_improvement(posterior.mean(k), posterior.sd(k), y_best);
    }
    return out;
}

AcquisitionScores ucb(const Posterior& posterior, double kappa) {
    if (!(kappa >= 0.0)) throw std::invalid_argument("ucb: kappa must be non-negative");
    posterior.validate();
    AcquisitionScores out{posterior.ids, std::vector<double>(posterior.size()), std::nullopt};
    for (std::size_t i = 0; i < posterior.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out.raw[i] = posterior.mean(k) + kappa * posterior.sd(k);
    }
    return out;
}

AcquisitionScores ts(const SurrogateModel& model, const Eigen::MatrixXd& candidates, std::vector<GeneId> ids,
                     std::uint64_t seed) {
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(candidates.rows())) {
        throw std::invalid_argument("ts: ids/rows length mismatch");
    }
    const Eigen::VectorXd draw = sample_posterior(model, candidates, seed);
    return AcquisitionScores{std::move(ids), std::vector<double>(draw.data(), draw.data() + draw.size()),
                             std::nullopt};
}

AcquisitionScores bio_augment(AcquisitionScores scores, const PriorWeights& prior, double beta,
                              std::size_t labeled_count) {
    if (!(beta >= 0.0)) throw std::invalid_argument("bio_augment: beta must be non-negative");
    if (labeled_count < 1) throw std::invalid_argument("bio_augment: labeled count must be >= 1");
    if (scores.ids != prior.ids) throw DataError("bio_augment: acquisition and prior ids are not aligned");
    if (prior.prob.size() != scores.raw.size()) throw DataError("bio_augment: prior length mismatch");
    if (scores.raw.empty()) {
        scores.weighted = std::vector<double>{};
        return scores;
    }
    const double lowest = *std::min_element(scores.raw.begin(), scores.raw.end());
    const double exponent = beta / static_cast<double>(labeled_count);
    std::vector<double> weighted(scores.raw.size());
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        const double shifted = scores.raw[i] - lowest + 1e-12;
        weighted[i] = exponent == 0.0 ? shifted : shifted * std::pow(prior.prob[i], exponent);
    }
    scores.weighted = std::move(weighted);
    return scores;
}

std::vector<GeneId> select_batch(const AcquisitionScores& scores, std::size_t batch_size) {
    scores.validate();
    if (batch_size < 1 || batch_size > scores.ids.size()) {
        throw std::invalid_argument("select_batch: batch size " + std::to_string(batch_size) +
                                    " outside [1, " + std::to_string(scores.ids.size()) + "]");
    }
    // Weighted ties fall back to raw scores before ids. The shift in bio_augment
    // is monotone but can round distinct raw values together; this keeps a
    // beta = 0 augmentation selecting exactly what the raw scores select.
    const auto& primary = scores.ranking();
    std::vector<std::size_t> order(scores.ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto better = [&](std::size_t a, std::size_t b) {
        if (primary[a] != primary[b]) return primary[a] > primary[b];
        if (scores.raw[a] != scores.raw[b]) return scores.raw[a] > scores.raw[b];
        return scores.ids[a] < scores.ids[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(batch_size), order.end(), better);
    std::vector<GeneId> out;
    out.reserve(batch_size);
    for (std::size_t k = 0; k < batch_size; ++k) out.push_back(scores.ids[order[k]]);
    return out;
}

std::vector<GeneId> random_policy(const std::vector<GeneId>& unlabeled, std::size_t batch_size, std::uint64_t seed) {
    if (batch_size < 1 || batch_size > unlabeled.size()) {
        throw std::invalid_argument("random_policy: batch size " + std::to_string(batch_size) + " outside [1, " +
                                    std::to_string(unlabeled.size()) + "]");
    }
    std::vector<GeneId> pool = unlabeled;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first B slots form the sample.
    for (std::size_t i = 0; i < batch_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(batch_size);
    return pool;
}

std::vector<GeneId> greedy_ea_policy(const PriorWeights& prior, std::size_t batch_size) {
    if (batch_size < 1 || batch_size > prior.ids.size()) {
        throw std::invalid_argument("greedy_ea_policy: batch size outside [1, " + std::to_string(prior.ids.size()) +
                                    "]");
    }
    std::vector<GeneId> out;
    for (auto i : top_k_indices(prior.prob, prior.ids, batch_size)) out.push_back(prior.ids[i]);
    return out;
}

Acquisition parse_acquisition(const std::string& name) {
    if (name == "ei") return Acquisition::ei;
    if (name == "ucb") return Acquisition::ucb;
    if (name == "ts") return Acquisition::ts;
    if (name == "random") return Acquisition::random;
    if (name == "greedy-ea") return Acquisition::greedy_ea;
    throw std::invalid_argument("unknown acquisition '" + name + "' (expected ei, ucb, ts, random or greedy-ea)");
}

std::string to_string(Acquisition acquisition) {
    switch (acquisition) {
        case Acquisition::ei: return "ei";
        case Acquisition::ucb: return "ucb";
        case Acquisition::ts: return "ts";
        case Acquisition::random: return "random";
        case Acquisition::greedy_ea: return "greedy-ea";
    }
    return "unknown";
}

}  // namespace biobo
