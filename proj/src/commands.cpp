#include "biobo/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "biobo/enrich.hpp"
#include "biobo/stats.hpp"

namespace biobo::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), "cannot open file");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

std::string header_line(const std::string& hash) { return "# spec_hash=" + hash; }

std::string effective_hash(const std::string& spec_hash, const GlobalOptions& opts) {
    if (!opts.seed) return spec_hash;
    return hex64(fnv1a64(spec_hash + ":seed=" + std::to_string(*opts.seed)));
}

std::string sanitize(const std::string& label) {
    std::string out;
    for (char c : label) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
    return out;
}

std::string surrogate_config(const RunConfig& c) { return to_string(c.surrogate) + "|" + c.features; }

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, sep)) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double to_double(const std::string& text, const std::string& source) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(source, "cannot parse '" + text + "' as a number");
    }
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), line_no, 1, e.what());
        }
    }
    return out;
}

// Runs `task(i)` for i in [0, n) on up to `jobs` threads; rethrows the first failure.
template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<AggregateRow> aggregate(const std::vector<const RunResult*>& runs) {
    struct Acc {
        std::string label;
        std::map<std::size_t, std::vector<double>> recall;
        std::map<std::size_t, std::vector<double>> labels;
    };
    std::vector<std::string> order;
    std::map<std::string, Acc> acc;
    for (const auto* r : runs) {
        const auto hash = r->config.hash();
        auto [it, inserted] = acc.try_emplace(hash);
        if (inserted) {
            order.push_back(hash);
            it->second.label = r->config.label();
        }
        for (const auto& rec : r->records) {
            it->second.recall[rec.cycle].push_back(rec.cumulative_recall);
            it->second.labels[rec.cycle].push_back(static_cast<double>(rec.labels_used));
        }
    }
    std::vector<AggregateRow> out;
    for (const auto& hash : order) {
        const auto& a = acc.at(hash);
        for (const auto& [cycle, values] : a.recall) {
            out.push_back({hash, a.label, cycle, values.size(), stats::mean(values), stats::sem(values),
                           stats::mean(a.labels.at(cycle))});
        }
    }
    return out;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << "config_hash,config,cycle,n_runs,mean_recall,sem_recall,mean_labels\n";
    for (const auto& r : rows) {
        out << r.config_hash << ',' << r.config << ',' << r.cycle << ',' << r.n_runs << ',' << r.mean_recall << ','
            << r.sem_recall << ',' << r.mean_labels << '\n';
    }
}

std::string percent_label(double q) {
    std::ostringstream s;
    s << std::setprecision(6) << q * 100.0;
    return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------

fs::path GlobalOptions::output_root() const {
    if (out_dir) return *out_dir;
    if (const char* env = std::getenv("BIOBO_OUT"); env != nullptr && *env != '\0') return env;
    return "biobo_out";
}

fs::path make_output_dir(const fs::path& root, const std::string& command) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
    fs::create_directories(root);
    const std::string base = command + "-" + stamp;
    for (int k = 0;; ++k) {
        const fs::path dir = root / (k == 0 ? base : base + "-" + std::to_string(k));
        if (fs::create_directory(dir)) return dir;
    }
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path, char sep) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line, sep);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size()) {
            throw ParseError(path.string(), line_no, 1,
                             "expected " + std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(cells.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    if (table.header.empty()) throw ParseError(path.string(), "missing header");
    return table;
}

// ---------------------------------------------------------------------------
// run

fs::path cmd_run(const fs::path& spec_path, const GlobalOptions& opts) {
    auto spec = load_experiment(spec_path);
    if (opts.seed) spec.seeds = {*opts.seed};
    const auto hash = effective_hash(spec.hash, opts);
    const auto data = load_data(spec);
    const auto grid = spec.grid();

    std::map<std::string, PathwayDB> priors;
    for (const auto& c : grid) {
        if (!priors.count(c.prior)) priors.emplace(c.prior, data.resolve_prior(c.prior, spec.base_dir));
    }

    std::vector<RunConfig> cells;
    for (const auto& c : grid)
        for (auto seed : spec.seeds) {
            RunConfig cell = c;
            cell.seed = seed;
            cells.push_back(std::move(cell));
        }

    std::vector<RunResult> results(cells.size());
    parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
        results[i] = run(data.pool, priors.at(cells[i].prior), cells[i]);
    });

    const auto dir = make_output_dir(opts.output_root(), "run");
    fs::create_directory(dir / "runs");
    for (const auto& r : results) {
        const auto name = sanitize(r.config.label()) + "__" + r.config.hash() + "__seed" +
                          std::to_string(r.config.seed) + ".jsonl";
        auto out = open_output(dir / "runs" / name);
        out << header_line(hash) << '\n';
        write_jsonl(out, r);
    }

    {
        auto out = open_output(dir / "summary.csv");
        out << header_line(hash) << '\n';
        out << summary_csv_header << ",config,surrogate_config,exhausted\n";
        for (const auto& r : results) {
            out << summary_csv_row(r) << ',' << r.config.label() << ',' << surrogate_config(r.config) << ','
                << (r.exhausted ? "true" : "false") << '\n';
        }
    }

    {
        std::vector<const RunResult*> ptrs;
        for (const auto& r : results) ptrs.push_back(&r);
        auto out = open_output(dir / "aggregate.csv");
        out << header_line(hash) << '\n';
        write_aggregate_csv(out, aggregate(ptrs));
    }

    {
        auto out = open_output(dir / "configs.jsonl");
        out << header_line(hash) << '\n';
        for (const auto& c : grid) {
            auto j = to_json(c);
            j.erase("seed");
            j["config"] = c.label();
            j["config_hash"] = c.hash();
            out << j.dump() << '\n';
        }
    }
    return dir;
}

// ---------------------------------------------------------------------------
// enrich

fs::path cmd_enrich(const EnrichOptions& options, const GlobalOptions& opts) {
    const auto labels = load_labels(options.labels);
    if (labels.ids.empty()) throw DataError("label file has no genes");
    const std::set<GeneId> universe(labels.ids.begin(), labels.ids.end());

    std::string fingerprint = read_file(options.labels) + '\0' + read_file(options.gmt) + '\0' +
                              std::to_string(options.fraction) + (options.all_rows ? ":all" : "");
    std::map<GeneId, double> labeled;
    if (options.run_file) {
        fingerprint += '\0' + read_file(*options.run_file);
        for (const auto& rec : read_jsonl(*options.run_file)) {
            const auto batch = rec.at("batch").get<std::vector<std::string>>();
            const auto values = rec.at("batch_values").get<std::vector<double>>();
            if (batch.size() != values.size()) throw DataError("run record batch/batch_values length mismatch");
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (!universe.count(batch[i])) {
                    throw DataError("run gene '" + batch[i] + "' is missing from the label file");
                }
                labeled.emplace(batch[i], values[i]);
            }
        }
    } else {
        for (std::size_t i = 0; i < labels.ids.size(); ++i) labeled.emplace(labels.ids[i], labels.values[i]);
    }

    const auto sample = top_fraction(labeled, options.fraction);
    const auto db = parse_gmt(options.gmt).restricted_to(universe);
    const auto table = run_enrichment(sample, universe, db);

    std::clog << "enrich: |S|=" << table.sample_size << " |G|=" << table.universe_size << " tested=" << table.tested()
              << " skipped_zero_overlap=" << table.skipped_zero_overlap
              << " significant=" << table.num_significant() << '\n';

    const auto dir = make_output_dir(opts.output_root(), "enrich");
    auto out = open_output(dir / "enrichment.csv");
    out << header_line(hex64(fnv1a64(fingerprint))) << '\n';
    out << "# sample_size=" << table.sample_size << " universe=" << table.universe_size << " tested=" << table.tested()
        << " skipped_zero_overlap=" << table.skipped_zero_overlap << '\n';
    write_enrichment_csv(out, table, !options.all_rows);
    return dir;
}

// ---------------------------------------------------------------------------
// eval-surrogate

fs::path cmd_eval_surrogate(const fs::path& spec_path, const GlobalOptions& opts) {
    auto spec = load_experiment(spec_path);
    if (opts.seed) spec.seeds = {*opts.seed};
    const auto hash = effective_hash(spec.hash, opts);
    const auto data = load_data(spec);

    struct Cell {
        RunConfig config;  // only surrogate, features and model settings matter
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& s : spec.surrogates)
        for (const auto& f : spec.features)
            for (auto seed : spec.seeds) {
                RunConfig c = spec.base;
                c.surrogate = parse_surrogate(s);
                c.features = f;
                cells.push_back({c, seed});
            }

    std::vector<std::string> rows(cells.size());
    parallel_for(cells.size(), opts.jobs, [&](std::size_t i) {
        const auto& [config, seed] = cells[i];
        const auto split = train_test_split(data.pool, spec.eval.test_fraction, seed);
        const auto features = run_features(data.pool, config.features);
        const auto x_train = data.pool.rows(features, split.train);
        const auto x_test = data.pool.rows(features, split.test);
        Eigen::VectorXd y_train(static_cast<Eigen::Index>(split.train.size()));
        Eigen::VectorXd y_test(static_cast<Eigen::Index>(split.test.size()));
        for (std::size_t k = 0; k < split.train.size(); ++k) y_train(static_cast<Eigen::Index>(k)) = data.pool.label(split.train[k]);
        for (std::size_t k = 0; k < split.test.size(); ++k) y_test(static_cast<Eigen::Index>(k)) = data.pool.label(split.test[k]);

        Posterior post;
        if (config.surrogate == SurrogateKind::gp) {
            post = fit_gp(x_train, y_train, config.gp).predict(x_test, split.test);
        } else {
            post = fit_ensemble(x_train, y_train, config.ensemble, derive_seed(seed, Stream::surrogate))
                       .predict(x_test, split.test);
        }
        const auto m = eval_metrics(post, y_test, spec.eval.fractions);

        nlohmann::json key = {{"surrogate", to_string(config.surrogate)}, {"features", config.features},
                              {"test_fraction", spec.eval.test_fraction}};
        key["model"] = config.surrogate == SurrogateKind::gp ? to_json(config)["gp"] : to_json(config)["ensemble"];
        std::ostringstream s;
        s.precision(17);
        s << hex64(fnv1a64(key.dump())) << ',' << surrogate_config(config) << ',' << seed << ','
          << to_string(config.surrogate) << ',' << config.features << ',' << split.train.size() << ','
          << split.test.size() << ',' << m.log_likelihood << ',' << m.rmse;
        for (const auto& t : m.top) s << ',' << t.log_likelihood << ',' << t.rmse;
        rows[i] = s.str();
    });

    const auto dir = make_output_dir(opts.output_root(), "eval-surrogate");
    auto out = open_output(dir / "metrics.csv");
    out << header_line(hash) << '\n';
    out << "config_hash,surrogate_config,seed,surrogate,features,n_train,n_test,ll,rmse";
    for (double q : spec.eval.fractions) {
        const auto pct = percent_label(q);
        out << ",ll@top" << pct << "%,rmse@top" << pct << '%';
    }
    out << '\n';
    for (const auto& r : rows) out << r << '\n';
    return dir;
}

// ---------------------------------------------------------------------------
// correlate

CorrelationMethod parse_correlation_method(const std::string& name) {
    if (name == "spearman") return CorrelationMethod::spearman;
    if (name == "pearson") return CorrelationMethod::pearson;
    throw std::invalid_argument("unknown correlation method '" + name + "' (expected spearman or pearson)");
}

fs::path cmd_correlate(const fs::path& recall_csv, const fs::path& metrics_csv, CorrelationMethod method,
                       const GlobalOptions& opts) {
    const auto recall = read_csv(recall_csv);
    const auto metrics = read_csv(metrics_csv);
    const auto r_key = recall.column("surrogate_config");
    const auto r_seed = recall.column("seed");
    const auto r_value = recall.column("final_recall");
    const auto m_key = metrics.column("surrogate_config");
    const auto m_seed = metrics.column("seed");

    std::vector<std::size_t> metric_cols;
    for (std::size_t c = 0; c < metrics.header.size(); ++c) {
        const auto& h = metrics.header[c];
        if (h.rfind("ll", 0) == 0 || h.rfind("rmse", 0) == 0) metric_cols.push_back(c);
    }
    if (metric_cols.empty()) throw DataError("metrics CSV has no ll*/rmse* columns");

    std::map<std::pair<std::string, std::string>, std::size_t> index;
    for (std::size_t i = 0; i < metrics.rows.size(); ++i) {
        const auto key = std::make_pair(metrics.rows[i][m_key], metrics.rows[i][m_seed]);
        if (!index.emplace(key, i).second) {
            throw DataError("metrics CSV has duplicate (surrogate_config, seed) = (" + key.first + ", " + key.second + ")");
        }
    }

    // Correlations are reported per run config (when summary.csv carries one) and pooled.
    const auto r_config = std::find(recall.header.begin(), recall.header.end(), "config") != recall.header.end()
                              ? std::optional<std::size_t>(recall.column("config"))
                              : std::nullopt;
    struct Group {
        std::vector<double> x;
        std::vector<std::vector<double>> y;
    };
    std::vector<std::string> order;
    std::map<std::string, Group> groups;
    auto add = [&](const std::string& name, double x, const std::vector<double>& y) {
        auto [it, inserted] = groups.try_emplace(name);
        if (inserted) {
            order.push_back(name);
            it->second.y.resize(y.size());
        }
        it->second.x.push_back(x);
        for (std::size_t k = 0; k < y.size(); ++k) it->second.y[k].push_back(y[k]);
    };
    for (const auto& row : recall.rows) {
        const auto it = index.find({row[r_key], row[r_seed]});
        if (it == index.end()) continue;
        const double x = to_double(row[r_value], recall_csv.string());
        std::vector<double> y;
        for (auto c : metric_cols) y.push_back(to_double(metrics.rows[it->second][c], metrics_csv.string()));
        add("all", x, y);
        if (r_config) add(row[*r_config], x, y);
    }
    if (groups.empty() || groups.at("all").x.size() < 2) {
        throw DataError("fewer than two joined (surrogate_config, seed) rows");
    }

    const std::string method_name = method == CorrelationMethod::spearman ? "spearman" : "pearson";
    const auto hash = hex64(fnv1a64(read_file(recall_csv) + '\0' + read_file(metrics_csv) + '\0' + method_name));
    const auto dir = make_output_dir(opts.output_root(), "correlate");
    auto out = open_output(dir / "correlation.csv");
    out << header_line(hash) << '\n';
    out << "method,config,metric,n,correlation\n";
    for (const auto& name : order) {
        const auto& g = groups.at(name);
        for (std::size_t k = 0; k < metric_cols.size(); ++k) {
            const double rho = g.x.size() < 2 ? std::nan("")
                               : method == CorrelationMethod::spearman ? stats::spearman(g.x, g.y[k])
                                                                       : stats::pearson(g.x, g.y[k]);
            out << method_name << ',' << name << ',' << metrics.header[metric_cols[k]] << ',' << g.x.size() << ',';
            if (std::isnan(rho)) {
                out << "nan";
            } else {
                out << rho;
            }
            out << '\n';
        }
    }
    return dir;
}

// ---------------------------------------------------------------------------
// report

std::vector<AggregateRow> aggregate_jsonl(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
            entry.path().filename() != "configs.jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no run files (*.jsonl) under " + dir.string());

    struct Acc {
        std::string label;
        std::map<std::size_t, std::vector<double>> recall;
        std::map<std::size_t, std::vector<double>> labels;
    };
    std::map<std::string, Acc> acc;
    for (const auto& f : files) {
        for (const auto& rec : read_jsonl(f)) {
            auto& a = acc[rec.at("config_hash").get<std::string>()];
            a.label = rec.at("config").get<std::string>();
            const auto cycle = rec.at("cycle").get<std::size_t>();
            a.recall[cycle].push_back(rec.at("cumulative_recall").get<double>());
            a.labels[cycle].push_back(rec.at("labels_used").get<double>());
        }
    }
    std::vector<AggregateRow> out;
    for (const auto& [hash, a] : acc)
        for (const auto& [cycle, values] : a.recall)
            out.push_back({hash, a.label, cycle, values.size(), stats::mean(values), stats::sem(values),
                           stats::mean(a.labels.at(cycle))});
    std::stable_sort(out.begin(), out.end(), [](const AggregateRow& a, const AggregateRow& b) {
        if (a.config != b.config) return a.config < b.config;
        if (a.config_hash != b.config_hash) return a.config_hash < b.config_hash;
        return a.cycle < b.cycle;
    });
    return out;
}

fs::path cmd_report(const fs::path& run_dir, const GlobalOptions& opts) {
    const auto rows = aggregate_jsonl(run_dir);

    std::map<std::string, std::set<std::string>> hashes_per_label;
    for (const auto& r : rows) hashes_per_label[r.config].insert(r.config_hash);

    std::ostringstream body;
    body.precision(17);
    body << "cycle\tconfig\tmean_recall\tsem\n";
    for (const auto& r : rows) {
        const auto name = hashes_per_label[r.config].size() > 1 ? r.config + "@" + r.config_hash : r.config;
        body << r.cycle << '\t' << name << '\t' << r.mean_recall << '\t' << r.sem_recall << '\n';
    }
    const auto dir = make_output_dir(opts.output_root(), "report");
    auto out = open_output(dir / "plot_data.tsv");
    out << header_line(hex64(fnv1a64(body.str()))) << '\n' << body.str();
    return dir;
}

}  // namespace biobo::cli
