#pragma once

#include "wsireport/decoder.hpp"
#include "wsireport/patching.hpp"
#include "wsireport/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace wsireport {

/// Whole-pipeline configuration: a flat `key = value` text file with `#`
/// comments, keys namespaced by module. Defaults are the standard
/// presets. Relative paths are resolved against the config file's
/// directory.
struct PipelineConfig {
    uint64_t seed = 0;
    int jobs = 1;

    SegmentationParams segmentation;
    QualityParams patching;
    int feature_dim = 1024;
    DecoderConfig decoder;
    TrainConfig train;

    double verify_tau = 0.85;
    int verify_dim = 384;

    std::filesystem::path out_dir = "out";
    std::filesystem::path feature_store; // defaults to <out_dir>/features.wsif
    std::filesystem::path checkpoint;    // defaults to <out_dir>/model.wsdm
    std::filesystem::path vocab;
    std::filesystem::path corpus;            // id<TAB>report TSV
    std::filesystem::path corpus_embeddings; // optional EMB1 store keyed by text
    std::filesystem::path lexicon_terms;
    std::filesystem::path lexicon_stopwords;
    std::filesystem::path reference; // reference report for pipeline scoring

    void validate() const;

    /// Seed for one pipeline stage: FNV-1a(stage name) XOR the run seed.
    uint64_t seed_for(const std::string& stage) const;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig default_config();

} // namespace wsireport
