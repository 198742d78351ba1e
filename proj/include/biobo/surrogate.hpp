#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biobo/common.hpp"

namespace biobo {

inline constexpr double sd_floor = 1e-6;

/// Per-candidate predictive mean and standard deviation.
struct Posterior {
    std::vector<GeneId> ids;  // may be empty for anonymous rows
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;

    std::size_t size() const noexcept { return static_cast<std::size_t>(mean.size()); }
    /// Throws DataError when lengths disagree, values are non-finite or sd <= 0.
    void validate() const;
};

class SurrogateModel {
public:
    virtual ~SurrogateModel() = default;

    virtual Posterior predict(const Eigen::MatrixXd& x, std::vector<GeneId> ids = {}) const = 0;
    /// One joint draw of the objective at every row of `x`.
    virtual Eigen::VectorXd sample(const Eigen::MatrixXd& x, std::uint64_t seed) const = 0;
    virtual Eigen::Index input_width() const noexcept = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Gaussian process

struct GPConfig {
    std::optional<double> lengthscale;  // nullopt: median heuristic
    double signal_variance = 1.0;
    double noise_variance = 0.1;
    double jitter = 1e-6;

    void validate() const;
};

/// Exact GP regression with a squared-exponential kernel.
///
/// Targets are centered by their training mean; the Cholesky factor of
/// K + (noise_variance + jitter) I is stored. On factorization failure the
/// jitter is doubled, up to six times.
class GaussianProcess final : public SurrogateModel {
public:
    GaussianProcess(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPConfig& config);

    Posterior predict(const Eigen::MatrixXd& x, std::vector<GeneId> ids = {}) const override;
    /// mean + sd * z with independent standard normal z per row.
    Eigen::VectorXd sample(const Eigen::MatrixXd& x, std::uint64_t seed) const override;
    Eigen::Index input_width() const noexcept override { return train_x_.cols(); }
    std::string name() const override { return "gp"; }

    double lengthscale() const noexcept { return lengthscale_; }
    double effective_jitter() const noexcept { return jitter_; }
    double y_mean() const noexcept { return y_mean_; }
    const GPConfig& config() const noexcept { return config_; }

    double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) const;

private:
    GPConfig config_;
    Eigen::MatrixXd train_x_;
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd chol_lower_;
    double y_mean_ = 0.0;
    double lengthscale_ = 1.0;
    double jitter_ = 0.0;
};

GaussianProcess fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPConfig& config = {});

/// Median of pairwise Euclidean distances between distinct rows (1.0 when
/// fewer than two rows or the median is zero).
double median_pairwise_distance(const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Deep ensemble

struct EnsembleConfig {
    int members = 10;
    int hidden_width = 64;
    int depth = 2;  // hidden layers, ReLU activations
    double learning_rate = 0.001;
    double weight_decay = 0.0001;
    int max_epochs = 200;
    int patience = 30;
    int batch_size = 256;
    double observation_noise_sd = 0.5;
    double validation_fraction = 0.1;

    void validate() const;
};

/// Fully connected ReLU network with a scalar output.
class Mlp {
public:
    Mlp() = default;
    Mlp(Eigen::Index input_width, int hidden_width, int depth, std::uint64_t seed);

    Eigen::VectorXd forward(const Eigen::MatrixXd& x) const;

    /// Overwrites all layers with zero weights and a constant output bias.
    static Mlp constant(Eigen::Index input_width, int hidden_width, int depth, double value);

    struct Layer {
        Eigen::MatrixXd weight;  // out x in
        Eigen::VectorXd bias;
    };
    std::vector<Layer>& layers() noexcept { return layers_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }

private:
    std::vector<Layer> layers_;
};

/// Independently initialized MLPs trained with Adam; predictive variance is
/// the member variance plus observation_noise_sd^2.
class DeepEnsemble final : public SurrogateModel {
public:
    struct Scaling {
        Eigen::RowVectorXd x_mean;
        Eigen::RowVectorXd x_scale;
        double y_mean = 0.0;
        double y_scale = 1.0;
    };

    DeepEnsemble(std::vector<Mlp> members, Scaling scaling, EnsembleConfig config);

    Posterior predict(const Eigen::MatrixXd& x, std::vector<GeneId> ids = {}) const override;
    /// Predictions of one member chosen uniformly by `seed`.
    Eigen::VectorXd sample(const Eigen::MatrixXd& x, std::uint64_t seed) const override;
    Eigen::Index input_width() const noexcept override { return scaling_.x_mean.size(); }
    std::string name() const override { return "ensemble"; }

    std::size_t size() const noexcept { return members_.size(); }
    /// Predictions of member `i` in the original target scale.
    Eigen::VectorXd member_predict(std::size_t i, const Eigen::MatrixXd& x) const;
    const EnsembleConfig& config() const noexcept { return config_; }

private:
    Eigen::MatrixXd scale_inputs(const Eigen::MatrixXd& x) const;

    std::vector<Mlp> members_;
    Scaling scaling_;
    EnsembleConfig config_;
};

/// Member m is seeded with derive_seed(seed, surrogate stream, m).
DeepEnsemble fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnsembleConfig& config,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sampling and metrics

Eigen::VectorXd sample_posterior(const SurrogateModel& model, const Eigen::MatrixXd& x, std::uint64_t seed);

struct SubsetMetrics {
    double fraction = 1.0;
    std::size_t count = 0;
    double log_likelihood = 0.0;
    double rmse = 0.0;
};

struct MetricRecord {
    double log_likelihood = 0.0;  // global, q = 1
    double rmse = 0.0;
    std::vector<SubsetMetrics> top;  // one entry per requested fraction
};

/// Mean Gaussian log density and RMSE, globally and on the true top-q subsets.
MetricRecord eval_metrics(const Posterior& posterior, const Eigen::VectorXd& y_true,
                          const std::vector<double>& fractions);

}  // namespace biobo
