#include "wsireport/config.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/rng.hpp"

#include <fstream>
#include <sstream>

namespace wsireport {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        int64_t out = std::stoll(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' needs an integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        uint64_t out = std::stoull(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' needs an unsigned integer, got '" + v +
                              "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size())
            throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' needs a number, got '" + v + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ValidationError("config key '" + key + "' has an empty list element");
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    if (out.empty())
        throw ValidationError("config key '" + key + "' needs a non-empty list");
    return out;
}

} // namespace

void PipelineConfig::validate() const {
    if (jobs < 1)
        throw ValidationError("jobs must be >= 1");
    segmentation.validate();
    patching.validate();
    decoder.validate();
    train.validate();
    if (feature_dim < 1)
        throw ValidationError("features.dim must be >= 1");
    if (verify_dim < 1)
        throw ValidationError("verify.dim must be >= 1");
    if (verify_tau < -1.0 || verify_tau > 1.0)
        throw ValidationError("verify.tau must be in [-1,1]");
}

uint64_t PipelineConfig::seed_for(const std::string& stage) const {
    return stage_seed(seed, stage);
}

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.feature_store = cfg.out_dir / "features.wsif";
    cfg.checkpoint = cfg.out_dir / "model.wsdm";
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config: " + path.string());

    PipelineConfig cfg;
    bool feature_store_set = false;
    bool checkpoint_set = false;
    const std::filesystem::path base = path.parent_path();
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() ? p : base / p;
    };

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  " is not key = value: " + path.string());
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ValidationError("config line " + std::to_string(lineno) +
                                  " has an empty key or value: " + path.string());

        if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "jobs") cfg.jobs = static_cast<int>(parse_int(key, value));
        else if (key == "segmentation.tau_s") cfg.segmentation.tau_s = static_cast<int>(parse_int(key, value));
        else if (key == "segmentation.tau_v") cfg.segmentation.tau_v = static_cast<int>(parse_int(key, value));
        else if (key == "segmentation.kernel") cfg.segmentation.kernel = static_cast<int>(parse_int(key, value));
        else if (key == "patching.patch_size") cfg.patching.patch_size = static_cast<int>(parse_int(key, value));
        else if (key == "patching.stride") cfg.patching.stride = static_cast<int>(parse_int(key, value));
        else if (key == "patching.min_tissue") cfg.patching.min_tissue = parse_double(key, value);
        else if (key == "patching.focus_min") cfg.patching.focus_min = parse_double(key, value);
        else if (key == "patching.v_min") cfg.patching.v_min = parse_double(key, value);
        else if (key == "patching.v_max") cfg.patching.v_max = parse_double(key, value);
        else if (key == "patching.s_min") cfg.patching.s_min = parse_double(key, value);
        else if (key == "patching.dark_intensity") cfg.patching.dark_intensity = static_cast<int>(parse_int(key, value));
        else if (key == "patching.dark_frac_max") cfg.patching.dark_frac_max = parse_double(key, value);
        else if (key == "patching.max_patches") cfg.patching.max_patches = static_cast<int>(parse_int(key, value));
        else if (key == "patching.levels") cfg.patching.levels = parse_int_list(key, value);
        else if (key == "features.dim") cfg.feature_dim = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.layers") cfg.decoder.layers = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.heads") cfg.decoder.heads = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.d_model") cfg.decoder.d_model = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.d_ff") cfg.decoder.d_ff = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.dropout") cfg.decoder.dropout = parse_double(key, value);
        else if (key == "decoder.max_len") cfg.decoder.max_len = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.vocab") cfg.decoder.vocab = static_cast<int>(parse_int(key, value));
        else if (key == "decoder.feat_dim") cfg.decoder.feat_dim = static_cast<int>(parse_int(key, value));
        else if (key == "train.warmup_epochs") cfg.train.warmup_epochs = static_cast<int>(parse_int(key, value));
        else if (key == "train.warmup_lr") cfg.train.warmup_lr = parse_double(key, value);
        else if (key == "train.base_lr") cfg.train.base_lr = parse_double(key, value);
        else if (key == "train.batch") cfg.train.batch = static_cast<int>(parse_int(key, value));
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(parse_int(key, value));
        else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double(key, value);
        else if (key == "train.beta1") cfg.train.adam_beta1 = parse_double(key, value);
        else if (key == "train.beta2") cfg.train.adam_beta2 = parse_double(key, value);
        else if (key == "train.eps") cfg.train.adam_eps = parse_double(key, value);
        else if (key == "verify.tau") cfg.verify_tau = parse_double(key, value);
        else if (key == "verify.dim") cfg.verify_dim = static_cast<int>(parse_int(key, value));
        else if (key == "paths.out") cfg.out_dir = resolve(value);
        else if (key == "paths.features") { cfg.feature_store = resolve(value); feature_store_set = true; }
        else if (key == "paths.checkpoint") { cfg.checkpoint = resolve(value); checkpoint_set = true; }
        else if (key == "paths.vocab") cfg.vocab = resolve(value);
        else if (key == "paths.corpus") cfg.corpus = resolve(value);
        else if (key == "paths.corpus_embeddings") cfg.corpus_embeddings = resolve(value);
        else if (key == "paths.lexicon") cfg.lexicon_terms = resolve(value);
        else if (key == "paths.stopwords") cfg.lexicon_stopwords = resolve(value);
        else if (key == "paths.reference") cfg.reference = resolve(value);
        else
            throw ValidationError("unknown config key '" + key + "' at line " +
                                  std::to_string(lineno) + ": " + path.string());
    }

    if (!cfg.out_dir.is_absolute())
        cfg.out_dir = base / cfg.out_dir;
    if (!feature_store_set)
        cfg.feature_store = cfg.out_dir / "features.wsif";
    if (!checkpoint_set)
        cfg.checkpoint = cfg.out_dir / "model.wsdm";
    cfg.validate();
    return cfg;
}

} // namespace wsireport
