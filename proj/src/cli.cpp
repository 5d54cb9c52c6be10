#include "wsireport/cli.hpp"
#include "wsireport/decoder.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/evaluation.hpp"
#include "wsireport/features.hpp"
#include "wsireport/rng.hpp"
#include "wsireport/segmentation.hpp"
#include "wsireport/synthetic.hpp"
#include "wsireport/text.hpp"
#include "wsireport/tokenizer.hpp"
#include "wsireport/verification.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace wsireport {

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (size_t i = static_cast<size_t>(t); i < n; i += static_cast<size_t>(jobs))
                    fn(i);
            } catch (...) {
                errors[static_cast<size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

std::string slide_id(const std::filesystem::path& slide_dir) {
    std::filesystem::path p = slide_dir;
    if (p.filename().empty())
        p = p.parent_path();
    return p.filename().string();
}

// Per-level refined tissue masks for the configured levels.
std::map<int, BinaryMask> refined_masks(const PipelineConfig& cfg, const PyramidSource& src) {
    std::map<int, BinaryMask> out;
    for (int level : cfg.patching.levels) {
        const RgbImage& img = src.level_image(level);
        out.emplace(level, refine_mask(tissue_mask(img, cfg.segmentation), cfg.segmentation));
    }
    return out;
}

BinaryMask mask_region(const BinaryMask& mask, int64_t x, int64_t y, int side) {
    BinaryMask out(side, side);
    for (int row = 0; row < side; ++row)
        for (int col = 0; col < side; ++col)
            out.at(col, row) = mask.at(static_cast<int>(x) + col, static_cast<int>(y) + row);
    return out;
}

std::string single_line(std::string text) {
    for (char& c : text)
        if (c == '\n' || c == '\r' || c == '\t')
            c = ' ';
    while (!text.empty() && text.back() == ' ')
        text.pop_back();
    size_t b = text.find_first_not_of(' ');
    return b == std::string::npos ? "" : text.substr(b);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out)
        throw IoError("write failed: " + path.string());
}

struct TsvRow {
    std::string id;
    std::vector<std::string> fields;
};

std::vector<TsvRow> read_tsv(const std::filesystem::path& path, size_t min_fields) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open: " + path.string());
    std::vector<TsvRow> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        TsvRow row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t'))
            row.fields.push_back(field);
        if (row.fields.size() < min_fields + 1)
            throw ValidationError("line " + std::to_string(lineno) + " of " + path.string() +
                                  " has too few tab-separated fields");
        row.id = row.fields[0];
        row.fields.erase(row.fields.begin());
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

SegmentResult cmd_segment(const PipelineConfig& cfg, const std::filesystem::path& slide_dir) {
    cfg.validate();
    PyramidSource src = load_manifest(slide_dir / "pyramid.json");
    std::filesystem::create_directories(cfg.out_dir);

    std::string summary;
    for (int level : cfg.patching.levels) {
        const RgbImage& img = src.level_image(level);
        BinaryMask refined = refine_mask(tissue_mask(img, cfg.segmentation), cfg.segmentation);
        write_mask_pgm(refined, cfg.out_dir / ("mask_level_" + std::to_string(level) + ".pgm"));
        int64_t ones = 0;
        for (uint8_t b : refined.bits)
            ones += b;
        double frac = static_cast<double>(ones) / static_cast<double>(refined.bits.size());
        char line[128];
        std::snprintf(line, sizeof(line), "level %d: tissue %.4f%%\n", level, 100.0 * frac);
        summary += line;
    }
    write_text_file(cfg.out_dir / "segment_summary.txt", summary);
    return {summary};
}

PatchResult cmd_patch(const PipelineConfig& cfg, const std::filesystem::path& slide_dir) {
    cfg.validate();
    PyramidSource src = load_manifest(slide_dir / "pyramid.json");
    std::filesystem::create_directories(cfg.out_dir);

    QualityParams qp = cfg.patching;
    qp.seed = cfg.seed_for("patch");

    std::map<int, BinaryMask> masks = refined_masks(cfg, src);

    std::vector<PatchRecord> all;
    for (int level : qp.levels) {
        const LevelEntry& entry = src.entry(level);
        const BinaryMask& mask = masks.at(level);
        auto grid = grid_candidates(entry.width, entry.height, qp);
        std::vector<PatchRecord> recs(grid.size());
        parallel_for(grid.size(), cfg.jobs, [&](size_t i) {
            auto [x, y] = grid[i];
            RgbImage patch = read_region(src, level, x, y, qp.patch_size, qp.patch_size);
            PatchRecord rec = evaluate_patch(patch, mask_region(mask, x, y, qp.patch_size), qp);
            rec.level = level;
            rec.x = x;
            rec.y = y;
            recs[i] = rec;
        });
        all.insert(all.end(), recs.begin(), recs.end());
    }
    std::sort(all.begin(), all.end(), [](const PatchRecord& a, const PatchRecord& b) {
        return std::tie(a.level, a.y, a.x) < std::tie(b.level, b.y, b.x);
    });

    std::map<int, std::vector<PatchRecord>> accepted;
    size_t n_accepted = 0;
    for (const auto& r : all)
        if (r.accepted) {
            accepted[r.level].push_back(r);
            ++n_accepted;
        }
    std::map<int, std::vector<PatchRecord>> sampled = stratified_sample(accepted, qp);

    std::vector<PatchRecord> selection;
    for (const auto& [level, recs] : sampled)
        selection.insert(selection.end(), recs.begin(), recs.end());

    PatchResult res;
    res.patches_csv = cfg.out_dir / "patches.csv";
    res.selection_csv = cfg.out_dir / "selection.csv";
    write_patch_csv(all, res.patches_csv);
    write_patch_csv(selection, res.selection_csv);
    res.candidates = all.size();
    res.accepted = n_accepted;
    res.selected = selection.size();
    return res;
}

std::filesystem::path cmd_extract(const PipelineConfig& cfg,
                                  const std::filesystem::path& slide_dir) {
    cfg.validate();
    std::vector<PatchRecord> selection = read_patch_csv(cfg.out_dir / "selection.csv");
    PyramidSource src = load_manifest(slide_dir / "pyramid.json");
    StubEncoder enc(cfg.feature_dim);
    RegionReader reader = [&](const PatchRecord& rec) {
        return read_region(src, rec.level, rec.x, rec.y, cfg.patching.patch_size,
                           cfg.patching.patch_size);
    };
    FeatureMatrix m = build_feature_matrix(selection, reader, enc, cfg.jobs);
    write_store(m, cfg.feature_store);
    return cfg.feature_store;
}

std::filesystem::path cmd_train(const PipelineConfig& cfg,
                                const std::filesystem::path& dataset_dir) {
    cfg.validate();
    if (cfg.vocab.empty())
        throw ValidationError("paths.vocab must be set for training");
    Vocab vocab = Vocab::load(cfg.vocab);
    if (vocab.size() > cfg.decoder.vocab)
        throw ValidationError("vocab file has more entries than decoder.vocab");

    if (!std::filesystem::is_directory(dataset_dir))
        throw IoError("dataset directory not found: " + dataset_dir.string());
    std::vector<std::filesystem::path> stores;
    for (const auto& e : std::filesystem::directory_iterator(dataset_dir))
        if (e.is_regular_file() && e.path().extension() == ".wsif")
            stores.push_back(e.path());
    std::sort(stores.begin(), stores.end());
    if (stores.empty())
        throw ValidationError("no .wsif feature stores in " + dataset_dir.string());

    struct Pair {
        Mat features;
        std::vector<int> input, target;
    };
    std::vector<Pair> pairs;
    for (const auto& store_path : stores) {
        std::filesystem::path txt = store_path;
        txt.replace_extension(".txt");
        if (!std::filesystem::exists(txt))
            throw IoError("missing report text for " + store_path.string());
        FeatureMatrix fm = read_store(store_path);
        if (fm.dim != cfg.decoder.feat_dim)
            throw ValidationError("feature store dim " + std::to_string(fm.dim) +
                                  " does not match decoder.feat_dim: " + store_path.string());
        if (fm.n == 0)
            throw ValidationError("empty feature store cannot be trained on: " +
                                  store_path.string());
        Pair p;
        p.features = Mat(static_cast<int>(fm.n), fm.dim);
        for (int64_t i = 0; i < fm.n; ++i)
            for (int j = 0; j < fm.dim; ++j)
                p.features.at(static_cast<int>(i), j) = static_cast<double>(fm.row(i)[j]);
        std::vector<int> toks = tokenize(single_line(read_text_file(txt)), vocab);
        if (static_cast<int>(toks.size()) > cfg.decoder.max_len - 1)
            toks.resize(static_cast<size_t>(cfg.decoder.max_len - 1));
        p.input.push_back(kBosId);
        p.input.insert(p.input.end(), toks.begin(), toks.end());
        p.target = toks;
        p.target.push_back(kEosId);
        pairs.push_back(std::move(p));
    }

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed_for("train");

    DecoderModel model = DecoderModel::zeros(cfg.decoder);
    xavier_init(model, tc.seed);
    AdamState adam = AdamState::zeros(cfg.decoder);
    std::mt19937_64 rng(mix64(tc.seed));

    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream log(cfg.out_dir / "train.log", std::ios::trunc);
    if (!log)
        throw IoError("cannot open for writing: " + (cfg.out_dir / "train.log").string());

    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        // Fisher-Yates on the pair order; batch order is fixed by the seed.
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_index(rng, i));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(tc.batch)) {
            size_t stop = std::min(order.size(), start + static_cast<size_t>(tc.batch));
            size_t max_len = 0;
            int max_mem = 0;
            for (size_t k = start; k < stop; ++k) {
                max_len = std::max(max_len, pairs[order[k]].input.size());
                max_mem = std::max(max_mem, pairs[order[k]].features.rows);
            }
            TrainBatch batch;
            for (size_t k = start; k < stop; ++k) {
                const Pair& p = pairs[order[k]];
                TrainItem item;
                item.features = Mat(max_mem, cfg.decoder.feat_dim);
                item.mem_pad.assign(static_cast<size_t>(max_mem), 1);
                for (int i = 0; i < p.features.rows; ++i) {
                    item.mem_pad[static_cast<size_t>(i)] = 0;
                    for (int j = 0; j < p.features.cols; ++j)
                        item.features.at(i, j) = p.features.at(i, j);
                }
                item.input = p.input;
                item.target = p.target;
                item.input.resize(max_len, kPadId);
                item.target.resize(max_len, kPadId);
                batch.push_back(std::move(item));
            }
            loss_sum += train_step(model, batch, adam, tc, epoch, rng);
            ++batches;
        }
        log << epoch << '\t' << fmt17(lr_schedule(epoch, tc)) << '\t'
            << fmt17(loss_sum / batches) << '\n';
    }
    log.close();
    save_checkpoint(model, cfg.checkpoint);
    return cfg.checkpoint;
}

std::string cmd_generate(const PipelineConfig& cfg, const std::filesystem::path& features_path) {
    cfg.validate();
    if (cfg.vocab.empty())
        throw ValidationError("paths.vocab must be set for generation");
    DecoderModel model = load_checkpoint(cfg.checkpoint);
    Vocab vocab = Vocab::load(cfg.vocab);
    FeatureMatrix fm = read_store(features_path);
    if (fm.n == 0)
        throw ValidationError("feature store is empty; nothing to condition on: " +
                              features_path.string());
    if (fm.dim != model.cfg.feat_dim)
        throw ValidationError("feature store dim does not match the checkpoint");

    Mat memory = project_features(fm, model.proj_w, model.proj_b);
    std::vector<char> mem_pad(static_cast<size_t>(memory.rows), 0);
    std::vector<int> seq = greedy_decode(model, memory, mem_pad, kBosId, kEosId);

    std::vector<int> content;
    for (int id : seq) {
        if (id == kBosId || id == kPadId)
            continue;
        if (id == kEosId)
            break;
        content.push_back(id);
    }
    std::string text = detokenize(content, vocab);
    std::filesystem::create_directories(cfg.out_dir);
    write_text_file(cfg.out_dir / "report.txt", text + "\n");
    return text;
}

std::filesystem::path cmd_score(const PipelineConfig& cfg, const std::filesystem::path& pairs_tsv,
                                const std::filesystem::path& out_tsv) {
    cfg.validate();
    KeywordLexicon lex;
    if (!cfg.lexicon_terms.empty() || !cfg.lexicon_stopwords.empty())
        lex = KeywordLexicon::load(cfg.lexicon_terms, cfg.lexicon_stopwords);
    MockEmbedder embedder(cfg.verify_dim);

    auto rows = read_tsv(pairs_tsv, 2); // id, generated, reference
    std::ofstream out(out_tsv, std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + out_tsv.string());
    out << "# metrics rouge=rouge_l_f1 bleu=bleu_4_add_one keyword=jaccard "
           "embedding=cosine\n";
    out << "# weights rouge=" << fmt6(kWeightRouge) << " bleu=" << fmt6(kWeightBleu)
        << " keyword=" << fmt6(kWeightKeyword) << " embedding=" << fmt6(kWeightEmbedding)
        << "\n";
    for (const auto& row : rows) {
        const std::string& gen = row.fields[0];
        const std::string& ref = row.fields[1];
        auto gen_toks = normalize_tokens(gen);
        auto ref_toks = normalize_tokens(ref);
        double r = rouge(gen_toks, ref_toks);
        double b = bleu(gen_toks, ref_toks);
        double k = keyword_score(extract_keywords(gen, lex), extract_keywords(ref, lex));
        double e;
        try {
            e = embedding_score(embedder.embed(gen), embedder.embed(ref));
        } catch (const ValidationError& ex) {
            throw ValidationError("row '" + row.id + "': " + ex.what());
        }
        ScoreBreakdown s = composite(r, b, k, e);
        out << row.id << '\t' << fmt6(s.rouge) << '\t' << fmt6(s.bleu) << '\t' << fmt6(s.keyword)
            << '\t' << fmt6(s.embedding) << '\t' << fmt6(s.composite) << '\n';
    }
    if (!out)
        throw IoError("write failed: " + out_tsv.string());
    return out_tsv;
}

std::filesystem::path cmd_verify(const PipelineConfig& cfg,
                                 const std::filesystem::path& generated_tsv,
                                 const std::filesystem::path& out_tsv) {
    cfg.validate();
    if (cfg.corpus.empty())
        throw ValidationError("paths.corpus must be set for verification");
    std::unique_ptr<EmbeddingProvider> provider;
    if (!cfg.corpus_embeddings.empty())
        provider = std::make_unique<PrecomputedEmbedder>(cfg.corpus_embeddings);
    else
        provider = std::make_unique<MockEmbedder>(cfg.verify_dim);
    ReferenceCorpus corpus = load_corpus_tsv(cfg.corpus, *provider);

    auto rows = read_tsv(generated_tsv, 1); // id, generated
    std::ofstream out(out_tsv, std::ios::trunc);
    if (!out)
        throw IoError("cannot open for writing: " + out_tsv.string());
    for (const auto& row : rows) {
        VerificationResult res = verify_or_replace(row.fields[0], corpus, *provider,
                                                   cfg.verify_tau);
        out << row.id << '\t' << res.final_text << '\t'
            << (res.replaced ? "replaced" : "retained") << '\t' << res.best_id << '\t'
            << fmt6(res.best_similarity) << '\n';
    }
    if (!out)
        throw IoError("write failed: " + out_tsv.string());
    return out_tsv;
}

PipelineResult cmd_pipeline(const PipelineConfig& cfg, const std::filesystem::path& slide_dir) {
    cfg.validate();
    cmd_segment(cfg, slide_dir);
    cmd_patch(cfg, slide_dir);
    cmd_extract(cfg, slide_dir);
    std::string report = cmd_generate(cfg, cfg.feature_store);

    PipelineResult res;
    res.report = report;
    res.report_path = cfg.out_dir / "report.txt";

    std::string final_text = report;
    if (!cfg.corpus.empty()) {
        const std::string id = slide_id(slide_dir);
        write_text_file(cfg.out_dir / "generated.tsv", id + "\t" + report + "\n");
        cmd_verify(cfg, cfg.out_dir / "generated.tsv", cfg.out_dir / "verified.tsv");
        auto rows = read_tsv(cfg.out_dir / "verified.tsv", 1);
        if (rows.size() != 1)
            throw ValidationError("verification produced an unexpected row count");
        final_text = rows[0].fields[0];
    }

    if (!cfg.reference.empty()) {
        std::string ref = single_line(read_text_file(cfg.reference));
        const std::string id = slide_id(slide_dir);
        write_text_file(cfg.out_dir / "pairs.tsv", id + "\t" + final_text + "\t" + ref + "\n");
        res.scores_tsv = cmd_score(cfg, cfg.out_dir / "pairs.tsv", cfg.out_dir / "scores.tsv");
    }
    return res;
}

PyramidSource cmd_make_synthetic(const std::filesystem::path& spec_path,
                                 const std::filesystem::path& out_dir) {
    return write_synthetic_pyramid(load_synthetic_spec(spec_path), out_dir);
}

} // namespace wsireport
