#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biobo/common.hpp"
#include "biobo/enrich.hpp"
#include "biobo/surrogate.hpp"

namespace biobo {

struct AcquisitionScores {
    std::vector<GeneId> ids;
    std::vector<double> raw;
    std::optional<std::vector<double>> weighted;

    /// Weighted scores when present, raw otherwise.
    const std::vector<double>& ranking() const noexcept { return weighted ? *weighted : raw; }
    void validate() const;
};

double normal_pdf(double z) noexcept;
/// Standard normal CDF via erfc.
double normal_cdf(double z) noexcept;

/// Closed-form expected improvement over `y_best`: sigma * (Z Phi(Z) + phi(Z)),
/// Z = (mu - y_best) / sigma, clamped at zero.
double expected_improvement(double mean, double sd, double y_best) noexcept;

AcquisitionScores ei(const Posterior& posterior, double y_best);
AcquisitionScores ucb(const Posterior& posterior, double kappa = 1.0);
/// Scores from one posterior draw (see sample_posterior).
AcquisitionScores ts(const SurrogateModel& model, const Eigen::MatrixXd& candidates, std::vector<GeneId> ids,
                     std::uint64_t seed);

/// weighted = (raw - min raw + 1e-12) * prior^(beta / labeled_count).
AcquisitionScores bio_augment(AcquisitionScores scores, const PriorWeights& prior, double beta,
                              std::size_t labeled_count);

/// Top-B ids by ranking score, descending; equal scores ordered by id.
std::vector<GeneId> select_batch(const AcquisitionScores& scores, std::size_t batch_size);

/// Uniform sample of B ids without replacement.
std::vector<GeneId> random_policy(const std::vector<GeneId>& unlabeled, std::size_t batch_size, std::uint64_t seed);

/// Top-B ids by prior probability; ties by id.
std::vector<GeneId> greedy_ea_policy(const PriorWeights& prior, std::size_t batch_size);

enum class Acquisition { ei, ucb, ts, random, greedy_ea };

Acquisition parse_acquisition(const std::string& name);
std::string to_string(Acquisition acquisition);

}  // namespace biobo
