#pragma once

#include "wsireport/config.hpp"
#include "wsireport/pyramid.hpp"

#include <filesystem>
#include <string>

namespace wsireport {

/// Pipeline stages behind the CLI subcommands. Every stage reads its
/// inputs from files and writes its outputs to files, so chaining them
/// (cmd_pipeline) is byte-identical to running them one by one.

struct SegmentResult {
    std::string summary; // one "level L: tissue ..." line per level
};
SegmentResult cmd_segment(const PipelineConfig& cfg, const std::filesystem::path& slide_dir);

struct PatchResult {
    std::filesystem::path patches_csv;
    std::filesystem::path selection_csv;
    size_t candidates = 0;
    size_t accepted = 0;
    size_t selected = 0;
};
PatchResult cmd_patch(const PipelineConfig& cfg, const std::filesystem::path& slide_dir);

/// Encodes the sampled selection into the feature store. Returns its path.
std::filesystem::path cmd_extract(const PipelineConfig& cfg,
                                  const std::filesystem::path& slide_dir);

/// Trains on (stem.wsif, stem.txt) pairs found in dataset_dir; writes the
/// per-epoch log next to the checkpoint. Returns the checkpoint path.
std::filesystem::path cmd_train(const PipelineConfig& cfg,
                                const std::filesystem::path& dataset_dir);

/// Greedy-decodes a report from a feature store; also writes report.txt
/// under the output directory.
std::string cmd_generate(const PipelineConfig& cfg, const std::filesystem::path& features_path);

/// Scores an id<TAB>generated<TAB>reference TSV; writes a TSV with the
/// component weights echoed in its header.
std::filesystem::path cmd_score(const PipelineConfig& cfg, const std::filesystem::path& pairs_tsv,
                                const std::filesystem::path& out_tsv);

/// Retrieval verification of an id<TAB>generated TSV against the corpus.
std::filesystem::path cmd_verify(const PipelineConfig& cfg,
                                 const std::filesystem::path& generated_tsv,
                                 const std::filesystem::path& out_tsv);

struct PipelineResult {
    std::string report;
    std::filesystem::path report_path;
    std::filesystem::path scores_tsv; // empty when no reference is configured
};
PipelineResult cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& slide_dir);

/// Renders a synthetic slide from a JSON description.
PyramidSource cmd_make_synthetic(const std::filesystem::path& spec_path,
                                 const std::filesystem::path& out_dir);

} // namespace wsireport
