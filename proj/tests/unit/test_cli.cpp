#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "biobo/commands.hpp"
#include "biobo/enrich.hpp"
#include "doctest.h"

using namespace biobo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("biobo_test_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
    return n;
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

const char* small_spec =
    "seeds = [0, 1, 2, 3, 4, 5, 6]\n"
    "[synthetic]\nn_genes = 150\nd = 4\nn_pathways = 5\n"
    "[run]\ncycles = 3\nbatch_size = 5\n"
    "[grid]\nacquisitions = [\"ucb\", \"random\"]\n";

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("experiment parsing") {
        const auto spec = parse_experiment(
            "seeds = [4, 5]\n[synthetic]\nn_genes = 80\n[run]\ncycles = 3\nbeta = 0.5\n"
            "[run.gp]\nlengthscale = \"median-heuristic\"\nnoise_variance = 0.2\n"
            "[grid]\nacquisitions = [\"ei\", \"greedy-ea\"]\npriors = [\"synthetic\"]\n",
            ".");
        CHECK(spec.seeds == std::vector<std::uint64_t>{4, 5});
        CHECK(spec.synthetic->n_genes == 80);
        CHECK(spec.base.cycles == 3);
        CHECK(spec.base.beta == 0.5);
        CHECK_FALSE(spec.base.gp.lengthscale);
        CHECK(spec.base.gp.noise_variance == 0.2);
        const auto grid = spec.grid();
        REQUIRE(grid.size() == 2);
        CHECK(grid[1].acquisition == Acquisition::greedy_ea);
    }

    TEST_CASE("experiment errors") {
        CHECK_THROWS(parse_experiment("[run]\ncycles = 3\n", "."));  // no data source
        CHECK_THROWS(parse_experiment("[synthetic]\n[data]\nlabels = \"x.csv\"\n", "."));
        CHECK_THROWS(parse_experiment("[synthetic]\n[grid]\nacquisitions = [\"greedy-ea\"]\n", "."));
        CHECK_THROWS(parse_experiment("seeds = [1, 1]\n[synthetic]\n", "."));
        CHECK_THROWS(parse_experiment("[synthetic]\n[run.gp]\nlengthscale = \"auto\"\n", "."));
        try {
            parse_experiment("[synthetic]\nn_genes = = 3\n", ".", "bad.toml");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).rfind("bad.toml:2:", 0) == 0);
        }
    }

    TEST_CASE("real data spec resolves files relative to the spec") {
        TempDir tmp("data");
        write(tmp.path / "a.csv", "gene_id,f0,f1\nA,1,0\nB,0,1\nC,1,1\nD,2,0\n");
        write(tmp.path / "b.csv", "gene_id,f0\nB,1\nC,2\nD,3\nE,4\n");
        write(tmp.path / "labels.csv", "gene_id,value\nA,1\nB,2\nC,3\nD,4\n");
        write(tmp.path / "p.gmt", "P1\td\tB\tC\nP2\td\tA\tE\n");
        write(tmp.path / "spec.toml",
              "[data]\nlabels = \"labels.csv\"\n[data.embeddings]\none = \"a.csv\"\ntwo = \"b.csv\"\n"
              "[data.pathways]\nhm = \"p.gmt\"\n");
        const auto spec = load_experiment(tmp.path / "spec.toml");
        const auto data = load_data(spec);
        CHECK(data.pool.ids() == std::vector<GeneId>{"B", "C", "D"});
        CHECK(data.pathways.at("hm").size() == 1);
        CHECK(data.resolve_prior("none", spec.base_dir).empty());
        CHECK(data.resolve_prior("p.gmt", spec.base_dir).size() == 1);
        CHECK_THROWS(data.resolve_prior("go", spec.base_dir));
    }

    TEST_CASE("run writes one jsonl per run and a deterministic aggregate") {
        TempDir tmp("run");
        write(tmp.path / "spec.toml", small_spec);
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        opts.jobs = 3;
        const auto a = cli::cmd_run(tmp.path / "spec.toml", opts);
        const auto b = cli::cmd_run(tmp.path / "spec.toml", opts);
        CHECK(a != b);
        CHECK(count_files(a / "runs", ".jsonl") == 14);
        CHECK(fs::exists(a / "aggregate.csv"));
        CHECK(slurp(a / "aggregate.csv") == slurp(b / "aggregate.csv"));
        CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));

        const auto header = first_line(a / "aggregate.csv");
        CHECK(header.rfind("# spec_hash=", 0) == 0);
        CHECK(first_line(a / "summary.csv") == header);
        for (const auto& e : fs::directory_iterator(a / "runs")) CHECK(first_line(e.path()) == header);

        // The aggregate CSV agrees with a recomputation from the run files.
        const auto table = cli::read_csv(a / "aggregate.csv");
        const auto rows = cli::aggregate_jsonl(a / "runs");
        REQUIRE(rows.size() == table.rows.size());
        std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_key;
        for (const auto& r : table.rows) by_key[{r[table.column("config_hash")], r[table.column("cycle")]}] = r;
        for (const auto& r : rows) {
            const auto& csv = by_key.at({r.config_hash, std::to_string(r.cycle)});
            CHECK(std::abs(std::stod(csv[table.column("mean_recall")]) - r.mean_recall) <= 1e-12);
            CHECK(std::abs(std::stod(csv[table.column("sem_recall")]) - r.sem_recall) <= 1e-12);
            CHECK(std::stoul(csv[table.column("n_runs")]) == 7);
        }
    }

    TEST_CASE("identical runs have zero sem") {
        TempDir tmp("sem");
        // 30 + 30 labels exhaust a 60-gene pool, so cycle 1 has recall 1 for every seed.
        write(tmp.path / "spec.toml",
              "seeds = [0, 1, 2, 3, 4, 5, 6]\n[synthetic]\nn_genes = 60\nn_pathways = 6\n"
              "[run]\ncycles = 1\nbatch_size = 30\n[grid]\nacquisitions = [\"random\"]\n");
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        const auto dir = cli::cmd_run(tmp.path / "spec.toml", opts);
        const auto table = cli::read_csv(dir / "aggregate.csv");
        REQUIRE(table.rows.size() == 2);
        CHECK(table.rows[1][table.column("mean_recall")] == "1");
        CHECK(table.rows[1][table.column("sem_recall")] == "0");
    }

    TEST_CASE("seed override and output root from the environment") {
        TempDir tmp("seed");
        write(tmp.path / "spec.toml", small_spec);
        ::setenv("BIOBO_OUT", (tmp.path / "env").c_str(), 1);
        cli::GlobalOptions opts;
        opts.seed = 42;
        const auto dir = cli::cmd_run(tmp.path / "spec.toml", opts);
        ::unsetenv("BIOBO_OUT");
        CHECK(dir.parent_path() == tmp.path / "env");
        CHECK(count_files(dir / "runs", ".jsonl") == 2);
        const auto summary = cli::read_csv(dir / "summary.csv");
        for (const auto& r : summary.rows) CHECK(r[summary.column("seed")] == "42");
    }

    TEST_CASE("enrich finds the synthetic signal pathway") {
        TempDir tmp("enrich");
        SynthParams p;
        p.n_genes = 200;
        p.n_pathways = 10;
        std::vector<std::string> signal;
        const auto [pool, db] = synth_benchmark(p, &signal);
        {
            std::ofstream labels(tmp.path / "labels.csv");
            write_labels(labels, pool.label_table());
            std::ofstream gmt(tmp.path / "p.gmt");
            write_gmt(gmt, db);
        }
        cli::EnrichOptions e;
        e.labels = tmp.path / "labels.csv";
        e.gmt = tmp.path / "p.gmt";
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        const auto dir = cli::cmd_enrich(e, opts);
        const auto text = slurp(dir / "enrichment.csv");
        CHECK(text.find("# sample_size=20 ") != std::string::npos);
        const auto table = cli::read_csv(dir / "enrichment.csv");
        REQUIRE_FALSE(table.rows.empty());
        CHECK(table.rows[0][0] == signal[0]);
        CHECK(table.header == std::vector<std::string>{"pathway", "overlap", "pathway_size", "p_value", "p_adjusted",
                                                       "odds_ratio", "combined_score"});
    }

    TEST_CASE("enrich with nothing significant writes only the header") {
        TempDir tmp("enrich_empty");
        std::ostringstream labels;
        labels << "gene_id,value\n";
        for (int i = 0; i < 200; ++i) labels << "g" << 1000 + i << ',' << i << '\n';
        write(tmp.path / "labels.csv", labels.str());
        write(tmp.path / "p.gmt", "P\td\tg1000\tg1001\n");
        cli::EnrichOptions e;
        e.labels = tmp.path / "labels.csv";
        e.gmt = tmp.path / "p.gmt";
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        const auto table = cli::read_csv(cli::cmd_enrich(e, opts) / "enrichment.csv");
        CHECK(table.rows.empty());
    }

    TEST_CASE("enrich from a run file") {
        TempDir tmp("enrich_run");
        write(tmp.path / "spec.toml", small_spec);
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        const auto run_dir = cli::cmd_run(tmp.path / "spec.toml", opts);
        const auto data = load_data(load_experiment(tmp.path / "spec.toml"));
        {
            std::ofstream labels(tmp.path / "labels.csv");
            write_labels(labels, data.pool.label_table());
            std::ofstream gmt(tmp.path / "p.gmt");
            write_gmt(gmt, data.pathways.at("synthetic"));
        }
        cli::EnrichOptions e;
        e.labels = tmp.path / "labels.csv";
        e.gmt = tmp.path / "p.gmt";
        e.all_rows = true;
        e.run_file = fs::directory_iterator(run_dir / "runs")->path();
        const auto text = slurp(cli::cmd_enrich(e, opts) / "enrichment.csv");
        // 5 + 3 * 5 labeled genes, top 10% -> 2
        CHECK(text.find("# sample_size=2 ") != std::string::npos);
    }

    TEST_CASE("eval-surrogate, correlate and report") {
        TempDir tmp("eval");
        write(tmp.path / "spec.toml",
              "seeds = [0, 1, 2]\n[synthetic]\nn_genes = 100\nd = 4\nn_pathways = 5\n"
              "[run]\ncycles = 2\nbatch_size = 5\n[run.ensemble]\nmembers = 2\nmax_epochs = 15\n"
              "[grid]\nsurrogates = [\"gp\", \"ensemble\"]\n");
        cli::GlobalOptions opts;
        opts.out_dir = tmp.path / "out";
        const auto eval = cli::cmd_eval_surrogate(tmp.path / "spec.toml", opts);
        const auto metrics = cli::read_csv(eval / "metrics.csv");
        CHECK(metrics.rows.size() == 6);
        CHECK(metrics.column("ll@top1%") > metrics.column("rmse"));
        CHECK(metrics.rows[0][metrics.column("n_test")] == "20");

        const auto run = cli::cmd_run(tmp.path / "spec.toml", opts);
        const auto corr = cli::cmd_correlate(run / "summary.csv", eval / "metrics.csv",
                                             cli::CorrelationMethod::pearson, opts);
        const auto c = cli::read_csv(corr / "correlation.csv");
        CHECK(c.rows.size() == 3 * 8);  // all + two configs, 8 metric columns
        CHECK(c.rows[0][c.column("n")] == "6");

        const auto report = cli::cmd_report(run, opts);
        const auto tsv = cli::read_csv(report / "plot_data.tsv", '\t');
        CHECK(tsv.header == std::vector<std::string>{"cycle", "config", "mean_recall", "sem"});
        CHECK(tsv.rows.size() == 2 * 3);
        CHECK(first_line(report / "plot_data.tsv").rfind("# spec_hash=", 0) == 0);
    }

    TEST_CASE("output directories are never reused") {
        TempDir tmp("dirs");
        const auto a = cli::make_output_dir(tmp.path, "x");
        const auto b = cli::make_output_dir(tmp.path, "x");
        CHECK(a != b);
    }

    TEST_CASE("correlation method names") {
        CHECK(cli::parse_correlation_method("pearson") == cli::CorrelationMethod::pearson);
        CHECK_THROWS(cli::parse_correlation_method("kendall"));
    }
}
