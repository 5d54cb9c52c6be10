#include "wsireport/cli.hpp"
#include "wsireport/errors.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int> jobs;
    bool dry_run = false;
};

wsireport::PipelineConfig make_config(const GlobalOpts& g) {
    wsireport::PipelineConfig cfg = g.config_path.empty()
                                        ? wsireport::default_config()
                                        : wsireport::load_config(g.config_path);
    if (g.seed)
        cfg.seed = *g.seed;
    if (g.jobs)
        cfg.jobs = *g.jobs;
    cfg.validate();
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"whole-slide image to report pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline config file (key = value)");
    app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--jobs", g.jobs, "worker threads for patch evaluation and encoding");
    app.add_flag("--dry-run", g.dry_run, "print the plan without writing anything");

    std::string slide_dir, dataset_dir, features_path, in_tsv, out_tsv, spec_path, out_dir;

    CLI::App* seg = app.add_subcommand("segment", "write per-level tissue masks and a summary");
    seg->add_option("slide", slide_dir, "slide directory containing pyramid.json")->required();

    CLI::App* patch = app.add_subcommand("patch", "evaluate grid candidates and sample patches");
    patch->add_option("slide", slide_dir)->required();

    CLI::App* extract = app.add_subcommand("extract", "encode the selection into a feature store");
    extract->add_option("slide", slide_dir)->required();

    CLI::App* train = app.add_subcommand("train", "train the decoder on (features, report) pairs");
    train->add_option("dataset", dataset_dir, "directory of stem.wsif + stem.txt pairs")
        ->required();

    CLI::App* generate = app.add_subcommand("generate", "greedy-decode a report");
    generate->add_option("features", features_path, "feature store (.wsif)")->required();

    CLI::App* score = app.add_subcommand("score", "score id<TAB>generated<TAB>reference pairs");
    score->add_option("pairs", in_tsv, "pairs TSV")->required();
    score->add_option("out", out_tsv, "output TSV")->required();

    CLI::App* verify = app.add_subcommand("verify", "retrieval verification against the corpus");
    verify->add_option("generated", in_tsv, "id<TAB>generated TSV")->required();
    verify->add_option("out", out_tsv, "output TSV")->required();

    CLI::App* pipeline = app.add_subcommand("pipeline", "run every stage on one slide");
    pipeline->add_option("slide", slide_dir)->required();

    CLI::App* make_syn = app.add_subcommand("make-synthetic", "render a synthetic slide");
    make_syn->add_option("spec", spec_path, "synthetic slide JSON description")->required();
    make_syn->add_option("out", out_dir, "output slide directory")->required();

    CLI11_PARSE(app, argc, argv);

    wsireport::PipelineConfig cfg = make_config(g);

    if (g.dry_run) {
        if (pipeline->parsed()) {
            std::cout << "plan: segment -> patch -> extract -> generate";
            if (!cfg.corpus.empty())
                std::cout << " -> verify";
            if (!cfg.reference.empty())
                std::cout << " -> score";
            std::cout << "\n  slide: " << slide_dir << "\n  out:   " << cfg.out_dir.string()
                      << "\n  seed:  " << cfg.seed << "\n";
        } else {
            std::cout << "plan: " << app.get_subcommands().front()->get_name()
                      << " (no files will be written)\n";
        }
        return 0;
    }

    if (seg->parsed()) {
        wsireport::SegmentResult res = wsireport::cmd_segment(cfg, slide_dir);
        std::cout << res.summary;
    } else if (patch->parsed()) {
        wsireport::PatchResult res = wsireport::cmd_patch(cfg, slide_dir);
        std::cout << "candidates " << res.candidates << ", accepted " << res.accepted
                  << ", selected " << res.selected << "\n"
                  << res.patches_csv.string() << "\n"
                  << res.selection_csv.string() << "\n";
    } else if (extract->parsed()) {
        std::cout << wsireport::cmd_extract(cfg, slide_dir).string() << "\n";
    } else if (train->parsed()) {
        std::cout << wsireport::cmd_train(cfg, dataset_dir).string() << "\n";
    } else if (generate->parsed()) {
        std::cout << wsireport::cmd_generate(cfg, features_path) << "\n";
    } else if (score->parsed()) {
        wsireport::cmd_score(cfg, in_tsv, out_tsv);
        std::cout << out_tsv << "\n";
    } else if (verify->parsed()) {
        wsireport::cmd_verify(cfg, in_tsv, out_tsv);
        std::cout << out_tsv << "\n";
    } else if (pipeline->parsed()) {
        wsireport::PipelineResult res = wsireport::cmd_pipeline(cfg, slide_dir);
        std::cout << res.report << "\n";
        if (!res.scores_tsv.empty())
            std::cout << res.scores_tsv.string() << "\n";
    } else if (make_syn->parsed()) {
        wsireport::cmd_make_synthetic(spec_path, out_dir);
        std::cout << out_dir << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const wsireport::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const wsireport::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
