#include "biobo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace biobo {

void Posterior::validate() const {
    if (mean.size() != sd.size()) throw DataError("posterior mean/sd length mismatch");
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(mean.size())) {
        throw DataError("posterior ids/mean length mismatch");
    }
    if (!mean.allFinite() || !sd.allFinite()) throw DataError("posterior contains non-finite values");
    if (sd.size() > 0 && sd.minCoeff() <= 0.0) throw DataError("posterior sd must be positive");
}

// ---------------------------------------------------------------------------
// Gaussian process

void GPConfig::validate() const {
    if (lengthscale && !(*lengthscale > 0.0)) throw std::invalid_argument("GP lengthscale must be positive");
    if (!(signal_variance > 0.0)) throw std::invalid_argument("GP signal_variance must be positive");
    if (!(noise_variance > 0.0)) throw std::invalid_argument("GP noise_variance must be positive");
    if (!(jitter > 0.0)) throw std::invalid_argument("GP jitter must be positive");
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    if (n < 2) return 1.0;
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).norm());
    const auto mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    double median = d[mid];
    if (d.size() % 2 == 0) {
        const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    return median > 0.0 ? median : 1.0;
}

GaussianProcess::GaussianProcess(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPConfig& config)
    : config_(config), train_x_(x) {
    config_.validate();
    if (x.rows() < 1) throw std::invalid_argument("GP needs at least one training point");
    if (x.rows() != y.size()) throw std::invalid_argument("GP training x/y length mismatch");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("GP training data must be finite");

    lengthscale_ = config_.lengthscale.value_or(median_pairwise_distance(x));
    y_mean_ = y.mean();

    const auto n = x.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = config_.signal_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            k(i, j) = kernel(x.row(i), x.row(j));
            k(j, i) = k(i, j);
        }
    }

    jitter_ = config_.jitter;
    for (int attempt = 0; attempt <= 6; ++attempt) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += config_.noise_variance + jitter_;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() == Eigen::Success) {
            chol_lower_ = llt.matrixL();
            alpha_ = llt.solve((y.array() - y_mean_).matrix());
            return;
        }
        if (attempt < 6) jitter_ *= 2.0;
    }
    throw NumericalError("GP Cholesky factorization failed after jitter escalation to " + std::to_string(jitter_));
}

double GaussianProcess::kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                               const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
    const double r2 = (a - b).squaredNorm();
    return config_.signal_variance * std::exp(-r2 / (2.0 * lengthscale_ * lengthscale_));
}

Posterior GaussianProcess::predict(const Eigen::MatrixXd& x, std::vector<GeneId> ids) const {
    if (x.cols() != train_x_.cols()) {
        throw std::invalid_argument("GP predict: feature width " + std::to_string(x.cols()) + " does not match " +
                                    std::to_string(train_x_.cols()));
    }
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(x.rows())) {
        throw std::invalid_argument("GP predict: ids/rows length mismatch");
    }
    const auto m = x.rows();
    const auto n = train_x_.rows();
    Eigen::MatrixXd k_star(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) k_star(i, j) = kernel(train_x_.row(i), x.row(j));

    Posterior post;
    post.ids = std::move(ids);
    post.mean = (k_star.transpose() * alpha_).array() + y_mean_;
    const Eigen::MatrixXd v = chol_lower_.triangularView<Eigen::Lower>().solve(k_star);
    const Eigen::VectorXd reduction = v.colwise().squaredNorm().transpose();
    post.sd.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double latent = std::max(0.0, config_.signal_variance - reduction(j));
        post.sd(j) = std::max(std::sqrt(latent + config_.noise_variance), sd_floor);
    }
    return post;
}

Eigen::VectorXd GaussianProcess::sample(const Eigen::MatrixXd& x, std::uint64_t seed) const {
    const auto post = predict(x);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd out(post.mean.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = post.mean(i) + post.sd(i) * normal(rng);
    return out;
}

GaussianProcess fit_gp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GPConfig& config) {
    return GaussianProcess(x, y, config);
}

// ---------------------------------------------------------------------------
// MLP

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

struct AdamState {
    std::vector<Mlp::Layer> m;
    std::vector<Mlp::Layer> v;
    long step = 0;

    explicit AdamState(const Mlp& net) {
        for (const auto& layer : net.layers()) {
            m.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                         Eigen::VectorXd::Zero(layer.bias.size())});
        }
        v = m;
    }
};

double mse(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() == 0) return 0.0;
    return (net.forward(x) - y).squaredNorm() / static_cast<double>(x.rows());
}

// One Adam step (L2 weight decay coupled into the gradient) on a minibatch.
double train_step(Mlp& net, AdamState& adam, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const EnsembleConfig& cfg) {
    auto& layers = net.layers();
    const auto n_layers = layers.size();
    std::vector<Eigen::MatrixXd> pre(n_layers);
    std::vector<Eigen::MatrixXd> act(n_layers + 1);
    act[0] = x;
    for (std::size_t l = 0; l < n_layers; ++l) {
        pre[l] = (act[l] * layers[l].weight.transpose()).rowwise() + layers[l].bias.transpose();
        act[l + 1] = (l + 1 < n_layers) ? relu(pre[l]) : pre[l];
    }
    const double batch = static_cast<double>(x.rows());
    const Eigen::VectorXd residual = act[n_layers].col(0) - y;
    const double loss = residual.squaredNorm() / batch;

    Eigen::MatrixXd delta = (2.0 / batch) * residual;
    ++adam.step;
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam.step));

    for (std::size_t l = n_layers; l-- > 0;) {
        Eigen::MatrixXd grad_w = delta.transpose() * act[l];
        Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * layers[l].weight).cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        grad_w += cfg.weight_decay * layers[l].weight;
        grad_b += cfg.weight_decay * layers[l].bias;

        auto& mw = adam.m[l].weight;
        auto& vw = adam.v[l].weight;
        mw = beta1 * mw + (1.0 - beta1) * grad_w;
        vw = beta2 * vw + (1.0 - beta2) * grad_w.cwiseAbs2();
        layers[l].weight.array() -=
            cfg.learning_rate * (mw.array() / bc1) / ((vw.array() / bc2).sqrt() + eps);

        auto& mb = adam.m[l].bias;
        auto& vb = adam.v[l].bias;
        mb = beta1 * mb + (1.0 - beta1) * grad_b;
        vb = beta2 * vb + (1.0 - beta2) * grad_b.cwiseAbs2();
        layers[l].bias.array() -= cfg.learning_rate * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + eps);
    }
    return loss;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx, std::size_t begin,
                          std::size_t end) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), x.cols());
    for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = x.row(idx[i]);
    return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx, std::size_t begin,
                     std::size_t end) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) out(static_cast<Eigen::Index>(i - begin)) = y(idx[i]);
    return out;
}

Mlp train_member(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnsembleConfig& cfg, std::uint64_t seed,
                 int member_index) {
    std::mt19937_64 rng(seed);
    Mlp net(x.cols(), cfg.hidden_width, cfg.depth, rng());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = order.size();
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    const bool early_stop = n_val >= 1 && n - n_val >= 1;
    const std::size_t n_train = early_stop ? n - n_val : n;

    std::vector<Eigen::Index> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    const Eigen::MatrixXd x_val = early_stop ? take_rows(x, order, n_train, n) : Eigen::MatrixXd();
    const Eigen::VectorXd y_val = early_stop ? take(y, order, n_train, n) : Eigen::VectorXd();

    AdamState adam(net);
    Mlp best = net;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const auto batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const auto stop = std::min(n_train, start + batch);
            const double loss = train_step(net, adam, take_rows(x, train_idx, start, stop),
                                           take(y, train_idx, start, stop), cfg);
            if (!std::isfinite(loss)) {
                throw NumericalError("ensemble member " + std::to_string(member_index) +
                                     ": non-finite training loss at epoch " + std::to_string(epoch));
            }
            epoch_loss += loss * static_cast<double>(stop - start);
        }
        const double monitor = early_stop ? mse(net, x_val, y_val) : epoch_loss / static_cast<double>(n_train);
        if (!std::isfinite(monitor)) {
            throw NumericalError("ensemble member " + std::to_string(member_index) + ": non-finite validation loss");
        }
        if (monitor < best_loss) {
            best_loss = monitor;
            best = net;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return best;
}

}  // namespace

Mlp::Mlp(Eigen::Index input_width, int hidden_width, int depth, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::Index in = input_width;
    for (int l = 0; l <= depth; ++l) {
        const Eigen::Index out = (l == depth) ? 1 : hidden_width;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (Eigen::Index i = 0; i < out; ++i)
            for (Eigen::Index j = 0; j < in; ++j) layer.weight(i, j) = u(rng);
        for (Eigen::Index i = 0; i < out; ++i) layer.bias(i) = u(rng);
        layers_.push_back(std::move(layer));
        in = out;
    }
}

Mlp Mlp::constant(Eigen::Index input_width, int hidden_width, int depth, double value) {
    Mlp net(input_width, hidden_width, depth, 0);
    for (auto& layer : net.layers_) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    net.layers_.back().bias(0) = value;
    return net;
}

Eigen::VectorXd Mlp::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = (a * layers_[l].weight.transpose()).rowwise() + layers_[l].bias.transpose();
        a = (l + 1 < layers_.size()) ? relu(z) : z;
    }
    return a.col(0);
}

// ---------------------------------------------------------------------------
// Deep ensemble

void EnsembleConfig::validate() const {
    if (members < 2) throw std::invalid_argument("ensemble needs at least two members");
    if (hidden_width < 1 || depth < 1) throw std::invalid_argument("ensemble hidden_width and depth must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("ensemble learning_rate must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("ensemble weight_decay must be non-negative");
    if (max_epochs < 1 || patience < 1 || batch_size < 1) {
        throw std::invalid_argument("ensemble max_epochs, patience and batch_size must be >= 1");
    }
    if (!(observation_noise_sd > 0.0)) throw std::invalid_argument("ensemble observation_noise_sd must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("ensemble validation_fraction must be in [0, 1)");
    }
}

DeepEnsemble::DeepEnsemble(std::vector<Mlp> members, Scaling scaling, EnsembleConfig config)
    : members_(std::move(members)), scaling_(std::move(scaling)), config_(config) {
    if (members_.empty()) throw std::invalid_argument("ensemble has no members");
}

Eigen::MatrixXd DeepEnsemble::scale_inputs(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_width()) {
        throw std::invalid_argument("ensemble predict: feature width " + std::to_string(x.cols()) +
                                    " does not match " + std::to_string(input_width()));
    }
    return (x.rowwise() - scaling_.x_mean).array().rowwise() / scaling_.x_scale.array();
}

Eigen::VectorXd DeepEnsemble::member_predict(std::size_t i, const Eigen::MatrixXd& x) const {
    return (members_.at(i).forward(scale_inputs(x)).array() * scaling_.y_scale + scaling_.y_mean).matrix();
}

Posterior DeepEnsemble::predict(const Eigen::MatrixXd& x, std::vector<GeneId> ids) const {
    if (!ids.empty() && ids.size() != static_cast<std::size_t>(x.rows())) {
        throw std::invalid_argument("ensemble predict: ids/rows length mismatch");
    }
    const auto xs = scale_inputs(x);
    Eigen::MatrixXd preds(x.rows(), static_cast<Eigen::Index>(members_.size()));
    for (std::size_t m = 0; m < members_.size(); ++m) {
        preds.col(static_cast<Eigen::Index>(m)) =
            (members_[m].forward(xs).array() * scaling_.y_scale + scaling_.y_mean).matrix();
    }
    Posterior post;
    post.ids = std::move(ids);
    post.mean = preds.rowwise().mean();
    const double noise_var = config_.observation_noise_sd * config_.observation_noise_sd;
    post.sd.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double var = (preds.row(i).array() - post.mean(i)).square().mean();
        post.sd(i) = std::max(std::sqrt(var + noise_var), sd_floor);
    }
    return post;
}

Eigen::VectorXd DeepEnsemble::sample(const Eigen::MatrixXd& x, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, members_.size() - 1);
    return member_predict(pick(rng), x);
}

DeepEnsemble fit_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const EnsembleConfig& config,
                          std::uint64_t seed) {
    config.validate();
    if (x.rows() < 2) throw std::invalid_argument("ensemble needs at least two training points");
    if (x.rows() != y.size()) throw std::invalid_argument("ensemble training x/y length mismatch");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("ensemble training data must be finite");

    DeepEnsemble::Scaling s;
    s.x_mean = x.colwise().mean();
    s.x_scale = ((x.rowwise() - s.x_mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < s.x_scale.size(); ++j)
        if (!(s.x_scale(j) > 1e-12)) s.x_scale(j) = 1.0;
    s.y_mean = y.mean();
    const double y_sd = std::sqrt((y.array() - s.y_mean).square().mean());
    s.y_scale = y_sd > 1e-12 ? y_sd : 1.0;

    const Eigen::MatrixXd xs = (x.rowwise() - s.x_mean).array().rowwise() / s.x_scale.array();
    const Eigen::VectorXd ys = (y.array() - s.y_mean) / s.y_scale;

    std::vector<Mlp> members;
    members.reserve(static_cast<std::size_t>(config.members));
    for (int m = 0; m < config.members; ++m) {
        members.push_back(train_member(xs, ys, config, derive_seed(seed, Stream::surrogate, static_cast<std::uint64_t>(m)), m));
    }
    return DeepEnsemble(std::move(members), std::move(s), config);
}

// ---------------------------------------------------------------------------
// Sampling and metrics

Eigen::VectorXd sample_posterior(const SurrogateModel& model, const Eigen::MatrixXd& x, std::uint64_t seed) {
    return model.sample(x, seed);
}

namespace {

double mean_log_density(const Posterior& p, const Eigen::VectorXd& y, const std::vector<std::size_t>& subset) {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double total = 0.0;
    for (auto i : subset) {
        const auto k = static_cast<Eigen::Index>(i);
        const double z = (y(k) - p.mean(k)) / p.sd(k);
        total += -half_log_2pi - std::log(p.sd(k)) - 0.5 * z * z;
    }
    return total / static_cast<double>(subset.size());
}

double root_mean_squared(const Posterior& p, const Eigen::VectorXd& y, const std::vector<std::size_t>& subset) {
    double total = 0.0;
    for (auto i : subset) {
        const auto k = static_cast<Eigen::Index>(i);
        total += (y(k) - p.mean(k)) * (y(k) - p.mean(k));
    }
    return std::sqrt(total / static_cast<double>(subset.size()));
}

}  // namespace

MetricRecord eval_metrics(const Posterior& posterior, const Eigen::VectorXd& y_true,
                          const std::vector<double>& fractions) {
    posterior.validate();
    if (y_true.size() != posterior.mean.size()) throw DataError("eval_metrics: y_true length mismatch");
    if (y_true.size() == 0) throw DataError("eval_metrics: empty evaluation set");
    if (!y_true.allFinite()) throw DataError("eval_metrics: y_true must be finite");
    const auto n = static_cast<std::size_t>(y_true.size());

    std::vector<GeneId> keys = posterior.ids;
    if (keys.empty()) {
        const auto width = std::to_string(n).size();
        for (std::size_t i = 0; i < n; ++i) {
            std::ostringstream s;
            s << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
            keys.push_back(s.str());
        }
    }
    const std::vector<double> values(y_true.data(), y_true.data() + y_true.size());

    MetricRecord rec;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    rec.log_likelihood = mean_log_density(posterior, y_true, all);
    rec.rmse = root_mean_squared(posterior, y_true, all);
    for (double q : fractions) {
        if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("eval_metrics: fractions must be in (0, 1]");
        const auto subset = top_k_indices(values, keys, ceil_count(q, n));
        rec.top.push_back({q, subset.size(), mean_log_density(posterior, y_true, subset),
                           root_mean_squared(posterior, y_true, subset)});
    }
    return rec;
}

}  // namespace biobo
