// Acceptance suite: one PASS/FAIL line per criterion. Each check compares the
// library against an oracle implemented here, independently of src/.
//
//   biobo_acceptance [--allow-fail N]...
//
// Exit status is non-zero when any criterion fails that was not allowed.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "biobo/acquire.hpp"
#include "biobo/commands.hpp"
#include "biobo/enrich.hpp"
#include "biobo/genepool.hpp"
#include "biobo/loop.hpp"
#include "biobo/stats.hpp"
#include "biobo/surrogate.hpp"

using namespace biobo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("biobo_acceptance_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------
// 1. hypergeometric tail vs exhaustive subset enumeration

Outcome hypergeometric_oracle() {
    double worst = 0.0;
    std::size_t cases = 0;
    for (int g = 1; g <= 12; ++g) {
        const unsigned full = 1u << g;
        for (int p = 0; p <= g; ++p) {
            const unsigned pathway = (1u << p) - 1u;  // the first p genes
            // count[s][a]: subsets of size s whose overlap with the pathway is a
            std::vector<std::vector<double>> count(g + 1, std::vector<double>(g + 1, 0.0));
            for (unsigned mask = 0; mask < full; ++mask) {
                count[std::popcount(mask)][std::popcount(mask & pathway)] += 1.0;
            }
            for (int s = 0; s <= g; ++s) {
                double total = 0.0;
                for (double c : count[s]) total += c;
                for (int a = 0; a <= std::min(p, s); ++a) {
                    double tail = 0.0;
                    for (int k = a; k <= g; ++k) tail += count[s][k];
                    const double oracle = tail / total;
                    const double got = hypergeom_p(g, p, s, a);
                    worst = std::max(worst, std::abs(got - oracle));
                    ++cases;
                }
            }
        }
    }
    return {worst <= 1e-12, std::to_string(cases) + " cases, max |err| " + fmt(worst, 3)};
}

// ---------------------------------------------------------------------------
// 2. GP posterior vs dense-inverse oracle

Outcome gp_exactness() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    std::uniform_int_distribution<int> n_dist(1, 5), d_dist(1, 3);
    double worst = 0.0;
    const int instances = 200;
    for (int inst = 0; inst < instances; ++inst) {
        const int n = n_dist(rng), d = d_dist(rng), m = 4;
        Eigen::MatrixXd x(n, d), xs(m, d);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) x(i, j) = unif(rng);
            y(i) = unif(rng) * 2.0;
        }
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) xs(i, j) = unif(rng);
        GPConfig cfg;
        cfg.lengthscale = 0.5 + std::abs(unif(rng));
        cfg.signal_variance = 0.5 + std::abs(unif(rng));
        cfg.noise_variance = 0.01 + 0.1 * std::abs(unif(rng));
        const auto post = fit_gp(x, y, cfg).predict(xs);

        const double l = *cfg.lengthscale, s2 = cfg.signal_variance;
        auto k = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
            return s2 * std::exp(-(a - b).squaredNorm() / (2 * l * l));
        };
        Eigen::MatrixXd K(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) K(i, j) = k(x.row(i), x.row(j));
        K.diagonal().array() += cfg.noise_variance + cfg.jitter;
        const Eigen::MatrixXd Kinv = K.fullPivLu().inverse();
        const double ybar = y.mean();
        for (int t = 0; t < m; ++t) {
            Eigen::VectorXd ks(n);
            for (int i = 0; i < n; ++i) ks(i) = k(xs.row(t), x.row(i));
            const double mu = ybar + ks.dot(Kinv * (y.array() - ybar).matrix());
            const double var = std::max(0.0, s2 - ks.dot(Kinv * ks)) + cfg.noise_variance;
            const double sd = std::max(std::sqrt(var), sd_floor);
            worst = std::max({worst, std::abs(mu - post.mean(t)), std::abs(sd - post.sd(t))});
        }
    }
    return {worst <= 1e-8, std::to_string(instances) + " instances, max |err| " + fmt(worst, 3)};
}

// ---------------------------------------------------------------------------
// 3. EI vs Monte Carlo

Outcome ei_monte_carlo() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mu_d(-2.0, 2.0), sd_d(0.05, 3.0);
    std::normal_distribution<double> z;
    const int draws = 1'000'000;
    double worst_ratio = 0.0;
    for (int t = 0; t < 20; ++t) {
        const double mu = mu_d(rng), sd = sd_d(rng), best = mu_d(rng);
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double imp = std::max(mu + sd * z(rng) - best, 0.0);
            sum += imp;
            sum2 += imp * imp;
        }
        const double mean = sum / draws;
        const double se = std::sqrt((sum2 / draws - mean * mean) / (draws - 1));
        const double err = std::abs(expected_improvement(mu, sd, best) - mean);
        worst_ratio = std::max(worst_ratio, se > 0 ? err / se : (err == 0 ? 0.0 : INFINITY));
    }
    return {worst_ratio <= 3.0, "20 triples x 1e6 draws, max |err|/SE " + fmt(worst_ratio, 3)};
}

// ---------------------------------------------------------------------------
// 4. prior softmax

EnrichmentTable hand_table(const std::vector<std::pair<std::string, double>>& significant_scores) {
    EnrichmentTable t;
    for (const auto& [name, c] : significant_scores) {
        EnrichmentRow r;
        r.pathway = name;
        r.overlap = 1;
        r.p_value = 1e-4;
        r.p_adjusted = 1e-3;
        r.odds_ratio = 1.0;
        r.combined_score = c;
        t.rows.push_back(r);
    }
    return t;
}

Outcome prior_correctness() {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };

    {  // no significant pathway: exactly uniform
        PathwayDB db;
        db.add("P", {"A"});
        auto t = hand_table({{"P", 5.0}});
        t.rows[0].p_adjusted = 0.5;
        const auto prior = build_prior({"A", "B", "C", "D"}, t, db, 0.1, Aggregation::mean);
        bool exact = true;
        for (double p : prior.prob) exact = exact && p == 0.25;
        check(exact, "uniform fallback");
    }
    {  // U=2, B in one significant pathway with c = 2, t = 0.1
        PathwayDB db;
        db.add("P", {"B"});
        const auto prior = build_prior({"A", "B"}, hand_table({{"P", 2.0}}), db, 0.1, Aggregation::mean);
        const double expected_b = std::exp(20.0) / (1.0 + std::exp(20.0));
        check(std::abs(prior.prob[1] - expected_b) <= 1e-9 && std::abs(prior.prob[0] - (1 - expected_b)) <= 1e-9,
              "two-gene softmax");
        check(std::abs(prior.score[0] - 0.0) <= 1e-9 && std::abs(prior.score[1] - 20.0) <= 1e-9, "two-gene scores");
    }
    {  // agg over {1, 3}: max 3, mean 2
        PathwayDB db;
        db.add("P1", {"X"});
        db.add("P3", {"X"});
        const auto table = hand_table({{"P1", 1.0}, {"P3", 3.0}});
        const double base = std::log((1.0 / 3.0) / (1.0 - 1.0 / 3.0));
        const auto mx = build_prior({"X", "Y", "Z"}, table, db, 1.0, Aggregation::max);
        const auto mn = build_prior({"X", "Y", "Z"}, table, db, 1.0, Aggregation::mean);
        check(std::abs(mx.score[0] - (base + 3.0)) <= 1e-9, "agg=max");
        check(std::abs(mn.score[0] - (base + 2.0)) <= 1e-9, "agg=mean");
        const double e = std::exp(2.0);
        check(std::abs(mn.prob[0] - e / (e + 2.0)) <= 1e-9, "agg=mean softmax");
    }
    {  // sums to one on random cases
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> c(0.0, 80.0);
        double worst = 0.0;
        for (int rep = 0; rep < 200; ++rep) {
            PathwayDB db;
            std::vector<GeneId> genes;
            for (int g = 0; g < 50; ++g) genes.push_back("g" + std::to_string(100 + g));
            std::vector<std::pair<std::string, double>> scores;
            for (int p = 0; p < 5; ++p) {
                std::set<GeneId> members;
                for (int g = 0; g < 50; ++g)
                    if (rng() % 4 == 0) members.insert(genes[g]);
                if (members.empty()) continue;
                db.add("P" + std::to_string(p), members);
                scores.emplace_back("P" + std::to_string(p), c(rng));
            }
            const auto prior = build_prior(genes, hand_table(scores), db, 0.1, Aggregation::mean);
            double sum = 0.0;
            bool positive = true;
            for (double p : prior.prob) {
                sum += p;
                positive = positive && p > 0.0;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
            check(positive, "positivity");
        }
        check(worst <= 1e-12, "sum to one (max err " + fmt(worst, 3) + ")");
    }
    std::string detail = failures.empty() ? "hand softmax, agg, uniform fallback, normalization" : "failed:";
    for (const auto& f : failures) detail += " " + f + ";";
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 5. no-harm mechanics

Outcome no_harm() {
    bool monotone = true, converged = true;
    for (double ratio : {1.5, 10.0, 100.0, 1000.0}) {
        PriorWeights prior;
        prior.ids = {"A", "B"};
        prior.prob = {ratio / (ratio + 1.0), 1.0 / (ratio + 1.0)};
        prior.score = {0.0, 0.0};
        double prev = INFINITY;
        for (std::size_t l = 1; l <= 10000; ++l) {
            const double f = regret_factor(prior, 1.0, l);
            monotone = monotone && f < prev;
            prev = f;
        }
        converged = converged && std::abs(prev - 1.0) <= 1e-3;
    }

    SynthParams sp;
    sp.n_genes = 300;
    sp.d = 8;
    sp.n_pathways = 10;
    const auto [pool, db] = synth_benchmark(sp);
    bool identical = true;
    std::size_t compared = 0;
    for (auto acq : {Acquisition::ucb, Acquisition::ei, Acquisition::ts}) {
        for (std::uint64_t seed : {0u, 1u, 2u}) {
            RunConfig plain;
            plain.cycles = 6;
            plain.batch_size = 10;
            plain.acquisition = acq;
            plain.seed = seed;
            RunConfig augmented = plain;
            augmented.prior = "synthetic";
            augmented.beta = 0.0;
            const auto a = run(pool, db, plain);
            const auto b = run(pool, db, augmented);
            for (std::size_t i = 0; i < a.records.size(); ++i) {
                identical = identical && i < b.records.size() && a.records[i].batch == b.records[i].batch;
                ++compared;
            }
        }
    }
    return {monotone && converged && identical,
            std::string("strictly decreasing: ") + (monotone ? "yes" : "no") + ", |C-1|<=1e-3 at L=1e4: " +
                (converged ? "yes" : "no") + ", beta=0 batches identical over " + std::to_string(compared) +
                " cycles: " + (identical ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 6. random-policy recall equals the labeled fraction

Outcome random_calibration() {
    SynthParams sp;
    sp.n_genes = 1000;
    const auto [pool, db] = synth_benchmark(sp);
    RunConfig c;
    c.acquisition = Acquisition::random;
    c.cycles = 1;
    c.batch_size = 25;  // 25 + 25 labels = 5% of the pool
    std::vector<double> recall;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        c.seed = seed;
        recall.push_back(run(pool, db, c).final_recall());
    }
    const double m = stats::mean(recall);
    const double fraction = 50.0 / 1000.0;
    return {std::abs(m - fraction) <= 0.01, "1000 seeds, mean recall " + fmt(m, 4) + " vs labeled fraction " +
                                                fmt(fraction, 3)};
}

// ---------------------------------------------------------------------------
// 7 + 8. headline ordering on the synthetic benchmark

struct Benchmark {
    std::map<std::string, std::vector<RunResult>> runs;

    double mean_final(const std::string& name) const {
        std::vector<double> v;
        for (const auto& r : runs.at(name)) v.push_back(r.final_recall());
        return stats::mean(v);
    }

    // Labels at which the seed-averaged recall curve first reaches `target`.
    std::optional<std::size_t> labels_to_reach(const std::string& name, double target) const {
        const auto& rs = runs.at(name);
        for (std::size_t c = 0; c < rs.front().records.size(); ++c) {
            std::vector<double> v;
            for (const auto& r : rs) v.push_back(r.records[c].cumulative_recall);
            if (stats::mean(v) >= target) return rs.front().records[c].labels_used;
        }
        return std::nullopt;
    }
};

const Benchmark& headline_benchmark() {
    static const Benchmark bench = [] {
        SynthParams sp;
        sp.n_genes = 1000;
        sp.n_pathways = 20;
        sp.signal_pathways = 1;
        sp.noise_sd = 0.3;
        const auto [pool, db] = synth_benchmark(sp);
        Benchmark b;
        const std::vector<std::pair<std::string, RunConfig>> configs = [] {
            RunConfig base;
            base.cycles = 20;
            base.batch_size = 16;
            base.init_size = 16;
            base.surrogate = SurrogateKind::gp;
            RunConfig ucb = base, bio = base, rnd = base, ea = base;
            bio.prior = "synthetic";
            rnd.acquisition = Acquisition::random;
            ea.acquisition = Acquisition::greedy_ea;
            ea.prior = "synthetic";
            return std::vector<std::pair<std::string, RunConfig>>{
                {"bio-ucb", bio}, {"ucb", ucb}, {"random", rnd}, {"greedy-ea", ea}};
        }();
        for (const auto& [name, cfg] : configs) {
            for (std::uint64_t seed = 0; seed < 7; ++seed) {
                RunConfig c = cfg;
                c.seed = seed;
                b.runs[name].push_back(run(pool, c.prior_enabled() ? db : PathwayDB{}, c));
            }
        }
        return b;
    }();
    return bench;
}

Outcome headline_ordering() {
    const auto& b = headline_benchmark();
    const double bio = b.mean_final("bio-ucb"), ucb = b.mean_final("ucb"), rnd = b.mean_final("random");
    const auto lb = b.labels_to_reach("bio-ucb", 0.5), lu = b.labels_to_reach("ucb", 0.5);
    const auto eff = labeling_efficiency(lb, lu);
    const bool pass = bio >= ucb && ucb >= rnd && bio - rnd >= 0.15 && eff && *eff >= 0.15;
    std::string detail = "final recall bio-ucb " + fmt(bio, 4) + ", ucb " + fmt(ucb, 4) + ", random " + fmt(rnd, 4) +
                         "; labels to recall 0.5: bio-ucb " + (lb ? std::to_string(*lb) : "unreached") + ", ucb " +
                         (lu ? std::to_string(*lu) : "unreached") + "; efficiency " +
                         (eff ? fmt(*eff * 100.0, 4) + "%" : "unreached") + " (need >= 15%)";
    return {pass, detail};
}

Outcome greedy_ea_vs_random() {
    const auto& b = headline_benchmark();
    const double ea = b.mean_final("greedy-ea"), rnd = b.mean_final("random");
    return {ea - rnd >= 0.05, "final recall greedy-ea " + fmt(ea, 4) + ", random " + fmt(rnd, 4)};
}

// ---------------------------------------------------------------------------
// 9. metric suite

Outcome metric_suite() {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);

    {
        Posterior p;
        p.mean = Eigen::VectorXd::LinSpaced(20, -1.0, 1.0);
        p.sd = Eigen::VectorXd::Ones(20);
        const auto m = eval_metrics(p, p.mean, {0.1});
        check(std::abs(m.log_likelihood + half_log_2pi) <= 1e-9 && m.rmse == 0.0, "exact fit LL/RMSE");
        check(m.top.size() == 1 && m.top[0].count == 2, "fractions [0.1] on 20 -> 2");
    }
    {
        Posterior p;
        p.mean = Eigen::VectorXd::Zero(1);
        p.sd = Eigen::VectorXd::Ones(1);
        const auto m = eval_metrics(p, Eigen::VectorXd::Constant(1, 2.0), {});
        check(std::abs(m.log_likelihood - (-half_log_2pi - 2.0)) <= 1e-9 && std::abs(m.rmse - 2.0) <= 1e-9,
              "single-point LL");
    }
    {  // ceiling sizes
        for (std::size_t n : {7u, 20u, 99u, 150u, 1000u}) {
            Posterior p;
            p.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            p.sd = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
            const auto m = eval_metrics(p, Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n), 0, 1),
                                        {0.01, 0.05, 0.10});
            const std::size_t expect[3] = {
                std::max<std::size_t>(1, (n * 1 + 99) / 100), std::max<std::size_t>(1, (n * 5 + 99) / 100),
                std::max<std::size_t>(1, (n * 10 + 99) / 100)};
            for (int q = 0; q < 3; ++q) check(m.top[q].count == expect[q], "ceiling size n=" + std::to_string(n));
        }
    }

    // Correlation command on crafted recall/metrics files.
    const auto dir = scratch_dir("correlate");
    auto correlate = [&](const std::vector<double>& x, const std::vector<double>& y, cli::CorrelationMethod method) {
        {
            std::ofstream r(dir / "recall.csv"), m(dir / "metrics.csv");
            r.precision(17);
            m.precision(17);
            r << "surrogate_config,seed,final_recall\n";
            m << "surrogate_config,seed,ll\n";
            for (std::size_t i = 0; i < x.size(); ++i) {
                r << "gp|fusion," << i << ',' << x[i] << '\n';
                m << "gp|fusion," << i << ',' << y[i] << '\n';
            }
        }
        cli::GlobalOptions opts;
        opts.out_dir = dir / "out";
        const auto out = cli::cmd_correlate(dir / "recall.csv", dir / "metrics.csv", method, opts);
        const auto table = cli::read_csv(out / "correlation.csv");
        return std::stod(table.rows.at(0).at(table.column("correlation")));
    };
    const std::vector<double> x = {-2, -1, 0, 1, 2};
    std::vector<double> cube;
    for (double v : x) cube.push_back(v * v * v);
    check(correlate(x, x, cli::CorrelationMethod::spearman) == 1.0, "spearman y=x");
    check(correlate(x, x, cli::CorrelationMethod::pearson) == 1.0, "pearson y=x");
    check(correlate(x, cube, cli::CorrelationMethod::spearman) == 1.0, "spearman x^3");
    check(correlate(x, cube, cli::CorrelationMethod::pearson) < 1.0, "pearson x^3 < 1");
    {
        const std::vector<double> a = {0.3, 0.1, 0.5, 0.2, 0.4};
        const std::vector<double> shuffled = {2.0, 5.0, 1.0, 4.0, 3.0};
        // brute force: distinct values, so rho = 1 - 6 sum d^2 / (n (n^2 - 1))
        auto rank = [](const std::vector<double>& v, std::size_t i) {
            return 1.0 + std::count_if(v.begin(), v.end(), [&](double w) { return w < v[i]; });
        };
        double d2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d2 += std::pow(rank(a, i) - rank(shuffled, i), 2);
        const double n = 5.0;
        const double oracle = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        check(std::abs(correlate(a, shuffled, cli::CorrelationMethod::spearman) - oracle) <= 1e-12,
              "spearman shuffle vs rank formula");
    }
    fs::remove_all(dir);

    std::string detail = failures.empty() ? "LL/RMSE hand values, top-q ceiling sizes, correlation examples" : "failed:";
    for (const auto& f : failures) detail += " " + f + ";";
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 10. determinism

Outcome determinism() {
    const auto dir = scratch_dir("determinism");
    {
        std::ofstream spec(dir / "spec.toml");
        spec << "seeds = [0, 1]\n"
                "[synthetic]\nn_genes = 200\nd = 6\nn_pathways = 8\n"
                "[run]\ncycles = 4\nbatch_size = 8\ntrack_surrogate_metrics = true\n"
                "[run.ensemble]\nmembers = 2\nmax_epochs = 20\n"
                "[grid]\nacquisitions = [\"ts\", \"ei\", \"random\"]\npriors = [\"none\", \"synthetic\"]\n"
                "surrogates = [\"gp\", \"ensemble\"]\n";
    }
    cli::GlobalOptions opts;
    opts.out_dir = dir / "out";
    opts.jobs = 2;
    const auto first = cli::cmd_run(dir / "spec.toml", opts);
    opts.jobs = 1;
    const auto second = cli::cmd_run(dir / "spec.toml", opts);

    std::size_t files = 0;
    bool identical = true;
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), first);
        identical = identical && fs::exists(second / rel) && slurp(entry.path()) == slurp(second / rel);
        ++files;
    }

    // Replay each run from the config recorded in its JSONL.
    SynthParams sp;
    sp.n_genes = 200;
    sp.d = 6;
    sp.n_pathways = 8;
    const auto [pool, db] = synth_benchmark(sp);
    std::size_t replayed = 0;
    bool replay_ok = true;
    for (const auto& entry : fs::directory_iterator(first / "runs")) {
        std::ifstream in(entry.path());
        std::string line;
        std::vector<std::string> recorded;
        std::optional<RunConfig> config;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto j = nlohmann::json::parse(line);
            if (!config) config = run_config_from_json(j.at("run_config"));
            recorded.push_back(line);
        }
        const auto result = run(pool, config->prior_enabled() ? db : PathwayDB{}, *config);
        std::ostringstream again;
        write_jsonl(again, result);
        std::istringstream lines(again.str());
        std::size_t i = 0;
        while (std::getline(lines, line)) replay_ok = replay_ok && i < recorded.size() && recorded[i++] == line;
        replay_ok = replay_ok && i == recorded.size();
        ++replayed;
    }
    fs::remove_all(dir);
    return {identical && replay_ok && files > 0,
            std::to_string(files) + " output files byte-identical across reruns: " + (identical ? "yes" : "no") +
                "; " + std::to_string(replayed) + " runs replayed from recorded config: " +
                (replay_ok ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> allowed;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--allow-fail") == 0 && i + 1 < argc) {
            allowed.insert(std::atoi(argv[++i]));
        } else {
            std::cerr << "usage: " << argv[0] << " [--allow-fail N]...\n";
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"hypergeometric tail matches subset enumeration (1e-12)", hypergeometric_oracle},
        {"GP posterior matches dense oracle (1e-8)", gp_exactness},
        {"EI within 3 SE of Monte Carlo", ei_monte_carlo},
        {"prior softmax hand cases (1e-9), normalization (1e-12)", prior_correctness},
        {"no-harm factor decay and beta=0 batch identity", no_harm},
        {"random-policy recall equals labeled fraction (+-0.01)", random_calibration},
        {"bio-ucb >= ucb >= random, +0.15 over random, >=15% labeling efficiency", headline_ordering},
        {"greedy-ea beats random by >= 0.05", greedy_ea_vs_random},
        {"metric suite and correlation examples", metric_suite},
        {"runs replay byte-identically", determinism},
    };

    int failed = 0, unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << criteria[i].first << " -- "
                  << o.detail << " [" << fmt(secs, 3) << " s]" << (o.pass || !allowed.count(id) ? "" : " (allowed)")
                  << std::endl;
        if (!o.pass) {
            ++failed;
            if (!allowed.count(id)) ++unexpected;
        }
    }
    std::cout << criteria.size() - failed << "/" << criteria.size() << " criteria passed" << std::endl;
    return unexpected == 0 ? 0 : 1;
}
