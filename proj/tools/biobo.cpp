#include <iostream>

#include "CLI11.hpp"
#include "biobo/commands.hpp"

using namespace biobo::cli;

int main(int argc, char** argv) {
    CLI::App app{"Biology-informed Bayesian optimization for gene prioritization"};
    app.require_subcommand(1);

    GlobalOptions global;
    std::string out_dir;
    std::uint64_t seed = 0;
    auto* out_opt = app.add_option("--out-dir", out_dir, "Output root (default: $BIOBO_OUT or ./biobo_out)");
    auto* seed_opt = app.add_option("--seed", seed, "Run this single seed instead of the spec's seed list");
    app.add_option("--jobs,-j", global.jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::string spec_path;
    auto* run = app.add_subcommand("run", "Run the experiment grid over all seeds");
    run->add_option("spec", spec_path, "Experiment TOML")->required()->check(CLI::ExistingFile);

    EnrichOptions enrich_opts;
    std::string labels, gmt, run_file;
    auto* enrich = app.add_subcommand("enrich", "Pathway enrichment of the top-labeled genes");
    enrich->add_option("--labels", labels, "Label CSV (gene_id,value); defines the universe")
        ->required()
        ->check(CLI::ExistingFile);
    enrich->add_option("--gmt", gmt, "Pathway GMT file")->required()->check(CLI::ExistingFile);
    enrich->add_option("--fraction", enrich_opts.fraction, "Top fraction of labeled genes")
        ->check(CLI::Range(0.0, 1.0));
    auto* run_opt = enrich->add_option("--run", run_file, "Use the genes labeled by a run (JSONL)")
                        ->check(CLI::ExistingFile);
    enrich->add_flag("--all", enrich_opts.all_rows, "Emit every tested pathway, not only significant ones");

    auto* eval = app.add_subcommand("eval-surrogate", "Held-out surrogate metrics");
    eval->add_option("spec", spec_path, "Experiment TOML")->required()->check(CLI::ExistingFile);

    std::string recall_csv, metrics_csv, method = "spearman";
    auto* corr = app.add_subcommand("correlate", "Correlate final recall with surrogate metrics");
    corr->add_option("--recall", recall_csv, "summary.csv from `run`")->required()->check(CLI::ExistingFile);
    corr->add_option("--metrics", metrics_csv, "metrics.csv from `eval-surrogate`")
        ->required()
        ->check(CLI::ExistingFile);
    corr->add_option("--method", method, "spearman or pearson")->check(CLI::IsMember({"spearman", "pearson"}));

    std::string run_dir;
    auto* report = app.add_subcommand("report", "Aggregate recall curves for plotting");
    report->add_option("run_dir", run_dir, "Directory written by `run`")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    if (*out_opt) global.out_dir = out_dir;
    if (*seed_opt) global.seed = seed;

    try {
        std::filesystem::path dir;
        if (*run) {
            dir = cmd_run(spec_path, global);
        } else if (*enrich) {
            enrich_opts.labels = labels;
            enrich_opts.gmt = gmt;
            if (*run_opt) enrich_opts.run_file = run_file;
            dir = cmd_enrich(enrich_opts, global);
        } else if (*eval) {
            dir = cmd_eval_surrogate(spec_path, global);
        } else if (*corr) {
            dir = cmd_correlate(recall_csv, metrics_csv, parse_correlation_method(method), global);
        } else if (*report) {
            dir = cmd_report(run_dir, global);
        }
        std::cout << dir.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "biobo: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
