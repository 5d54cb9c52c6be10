#include "wsireport/decoder.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/tokenizer.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace wsireport;
using wsitest::TempDir;

namespace {

DecoderConfig tiny_config() {
    DecoderConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.dropout = 0.0;
    cfg.max_len = 8;
    cfg.vocab = 12;
    cfg.feat_dim = 6;
    return cfg;
}

Mat random_mat(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    Mat m(r, c);
    for (auto& v : m.v)
        v = (2.0 * unit_uniform(rng) - 1.0) * scale;
    return m;
}

TrainBatch tiny_batch(const DecoderConfig& cfg, std::mt19937_64& rng) {
    TrainBatch batch;
    for (int b = 0; b < 2; ++b) {
        TrainItem item;
        item.features = random_mat(3, cfg.feat_dim, rng);
        item.mem_pad.assign(3, 0);
        if (b == 1)
            item.mem_pad[2] = 1; // exercise the padding mask in training
        item.input = {kBosId, 4, 5, 6, 7};
        item.target = {4, 5, 6, 7, kEosId};
        if (b == 1) {
            item.input = {kBosId, 8, 9, kPadId, kPadId};
            item.target = {8, 9, kEosId, kPadId, kPadId};
        }
        batch.push_back(std::move(item));
    }
    return batch;
}

DecoderModel tiny_model(uint64_t seed) {
    DecoderModel m = DecoderModel::zeros(tiny_config());
    xavier_init(m, seed);
    return m;
}

} // namespace

TEST_CASE("project_features matches the matmul oracle") {
    std::mt19937_64 rng(1);

    SUBCASE("identity projection returns the features") {
        Mat f = random_mat(5, 4, rng);
        Mat w(4, 4);
        for (int i = 0; i < 4; ++i)
            w.at(i, i) = 1.0;
        Mat b(1, 4);
        Mat m = project_features(f, w, b);
        CHECK(m.v == f.v);
    }
    SUBCASE("zero features give rows equal to the bias") {
        Mat f(3, 4);
        Mat w = random_mat(4, 6, rng);
        Mat b = random_mat(1, 6, rng);
        Mat m = project_features(f, w, b);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 6; ++j)
                CHECK(m.at(i, j) == b.at(0, j));
    }
    SUBCASE("random case within 1e-12 of the oracle") {
        Mat f = random_mat(3, 4, rng);
        Mat w = random_mat(4, 5, rng);
        Mat b = random_mat(1, 5, rng);
        Mat m = project_features(f, w, b);
        Mat expect = wsitest::oracle_matmul(f, w);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(m.at(i, j) ==
                      doctest::Approx(expect.at(i, j) + b.at(0, j)).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        Mat f(3, 4);
        Mat w(5, 5);
        Mat b(1, 5);
        CHECK_THROWS_AS(project_features(f, w, b), ValidationError);
    }
}

TEST_CASE("positional encoding matches the sinusoid formulas") {
    Mat pe = positional_encoding(16, 4);

    SUBCASE("position zero alternates 0 and 1") {
        CHECK(pe.at(0, 0) == 0.0);
        CHECK(pe.at(0, 1) == 1.0);
        CHECK(pe.at(0, 2) == 0.0);
        CHECK(pe.at(0, 3) == 1.0);
    }
    SUBCASE("position one, d_model four") {
        CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
        CHECK(pe.at(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
        CHECK(pe.at(1, 2) == doctest::Approx(std::sin(0.01)).epsilon(1e-12));
        CHECK(pe.at(1, 3) == doctest::Approx(std::cos(0.01)).epsilon(1e-12));
    }
    SUBCASE("pointwise within 1e-12 of direct evaluation, all in [-1,1]") {
        Mat big = positional_encoding(64, 32);
        for (int pos = 0; pos < 64; ++pos)
            for (int i = 0; 2 * i < 32; ++i) {
                double arg = pos / std::pow(10000.0, 2.0 * i / 32.0);
                CHECK(big.at(pos, 2 * i) == doctest::Approx(std::sin(arg)).epsilon(1e-12));
                CHECK(big.at(pos, 2 * i + 1) == doctest::Approx(std::cos(arg)).epsilon(1e-12));
                CHECK(std::abs(big.at(pos, 2 * i)) <= 1.0);
                CHECK(std::abs(big.at(pos, 2 * i + 1)) <= 1.0);
            }
    }
    SUBCASE("odd d_model is rejected") {
        CHECK_THROWS_AS(positional_encoding(8, 5), ValidationError);
    }
}

TEST_CASE("causal mask") {
    Mat m1 = causal_mask(1);
    CHECK(m1.at(0, 0) == 0.0);

    Mat m3 = causal_mask(3);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(m3.at(i, j) == (i >= j ? 0.0 : -inf));
    for (int i = 0; i < 3; ++i)
        CHECK(m3.at(i, i) == 0.0);
}

TEST_CASE("attention against the direct-summation oracle") {
    std::mt19937_64 rng(2);

    SUBCASE("single unmasked key returns its value row") {
        Mat q = random_mat(2, 4, rng);
        Mat k = random_mat(1, 4, rng);
        Mat v = random_mat(1, 5, rng);
        Mat mask(2, 1);
        Mat out = attention(q, k, v, mask);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(out.at(i, j) == v.at(0, j));
    }
    SUBCASE("identical keys give uniform weights") {
        Mat q = random_mat(1, 4, rng);
        Mat k(3, 4);
        Mat krow = random_mat(1, 4, rng);
        for (int j = 0; j < 3; ++j)
            for (int t = 0; t < 4; ++t)
                k.at(j, t) = krow.at(0, t);
        Mat v = random_mat(3, 2, rng);
        Mat out = attention(q, k, v, Mat(1, 3));
        for (int t = 0; t < 2; ++t) {
            double mean = (v.at(0, t) + v.at(1, t) + v.at(2, t)) / 3.0;
            CHECK(out.at(0, t) == doctest::Approx(mean).epsilon(1e-12));
        }
    }
    SUBCASE("random case within 1e-12 of the oracle") {
        Mat q = random_mat(2, 4, rng);
        Mat k = random_mat(3, 4, rng);
        Mat v = random_mat(3, 4, rng);
        Mat mask(2, 3);
        mask.at(0, 2) = -std::numeric_limits<double>::infinity();
        Mat out = attention(q, k, v, mask);
        Mat expect = wsitest::oracle_attention(q, k, v, mask);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(out.at(i, j) == doctest::Approx(expect.at(i, j)).epsilon(1e-12));
    }
    SUBCASE("fully masked row is an error") {
        Mat q = random_mat(1, 4, rng);
        Mat k = random_mat(2, 4, rng);
        Mat v = random_mat(2, 4, rng);
        Mat mask(1, 2);
        mask.at(0, 0) = mask.at(0, 1) = -std::numeric_limits<double>::infinity();
        CHECK_THROWS_WITH_AS(attention(q, k, v, mask), doctest::Contains("masked"),
                             ValidationError);
    }
    SUBCASE("attention rows are normalized: all-ones values return 1 within 1e-12") {
        for (int trial = 0; trial < 20; ++trial) {
            int n_q = 1 + static_cast<int>(rng() % 4);
            int n_k = 2 + static_cast<int>(rng() % 4);
            Mat q = random_mat(n_q, 4, rng, 3.0);
            Mat k = random_mat(n_k, 4, rng, 3.0);
            Mat ones(n_k, 1);
            for (auto& x : ones.v)
                x = 1.0;
            Mat mask(n_q, n_k);
            mask.at(0, n_k - 1) = -std::numeric_limits<double>::infinity();
            Mat out = attention(q, k, ones, mask);
            for (int i = 0; i < n_q; ++i)
                CHECK(out.at(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("decoder_forward determinism, causality and padding invariance") {
    std::mt19937_64 rng(4);
    DecoderModel model = tiny_model(11);
    Mat memory = random_mat(3, 8, rng);
    std::vector<char> mem_pad{0, 0, 1};
    std::vector<int> tokens{kBosId, 4, 5, 6};

    SUBCASE("eval mode is bitwise deterministic") {
        Mat a = decoder_forward(model, tokens, memory, mem_pad, false, nullptr);
        Mat b = decoder_forward(model, tokens, memory, mem_pad, false, nullptr);
        CHECK(a.v == b.v);
    }
    SUBCASE("future tokens cannot move earlier logits (bitwise)") {
        Mat base = decoder_forward(model, tokens, memory, mem_pad, false, nullptr);
        for (size_t j = 1; j < tokens.size(); ++j) {
            auto perturbed = tokens;
            perturbed[j] = 9;
            Mat out = decoder_forward(model, perturbed, memory, mem_pad, false, nullptr);
            for (size_t i = 0; i < j; ++i)
                for (int c = 0; c < model.cfg.vocab; ++c)
                    CHECK(out.at(static_cast<int>(i), c) == base.at(static_cast<int>(i), c));
        }
    }
    SUBCASE("padded memory rows are bitwise invisible") {
        Mat base = decoder_forward(model, tokens, memory, mem_pad, false, nullptr);
        Mat memory2 = memory;
        for (int j = 0; j < 8; ++j)
            memory2.at(2, j) = 1000.0 * (j + 1);
        Mat out = decoder_forward(model, tokens, memory2, mem_pad, false, nullptr);
        CHECK(out.v == base.v);
    }
    SUBCASE("all memory rows padded is an error") {
        std::vector<char> all_pad{1, 1, 1};
        CHECK_THROWS_WITH_AS(decoder_forward(model, tokens, memory, all_pad, false, nullptr),
                             doctest::Contains("padded"), ValidationError);
    }
    SUBCASE("sequences beyond max_len are rejected") {
        std::vector<int> long_seq(9, 4);
        CHECK_THROWS_AS(decoder_forward(model, long_seq, memory, mem_pad, false, nullptr),
                        ValidationError);
    }
}

TEST_CASE("cross_entropy_loss") {
    SUBCASE("uniform zero logits cost ln(V)") {
        Mat logits(3, 8);
        std::vector<std::vector<int>> targets{{4, 5, 6}};
        double loss = cross_entropy_loss({logits}, targets, kPadId);
        CHECK(loss == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    }
    SUBCASE("saturated logit on the target gives near-zero loss") {
        Mat logits(1, 8);
        logits.at(0, 5) = 1000.0;
        double loss = cross_entropy_loss({logits}, {{5}}, kPadId);
        CHECK(loss >= 0.0);
        CHECK(loss < 1e-9);
    }
    SUBCASE("padded positions contribute nothing") {
        std::mt19937_64 rng(6);
        Mat logits = random_mat(4, 8, rng);
        std::vector<int> with_pad{4, kPadId, 6, kPadId};
        double got = cross_entropy_loss({logits}, {with_pad}, kPadId);

        // loop-based oracle over non-pad positions only
        double expect = 0.0;
        int n = 0;
        for (int i = 0; i < 4; ++i) {
            int t = with_pad[static_cast<size_t>(i)];
            if (t == kPadId)
                continue;
            double mx = logits.at(i, 0);
            for (int j = 1; j < 8; ++j)
                mx = std::max(mx, logits.at(i, j));
            double z = 0.0;
            for (int j = 0; j < 8; ++j)
                z += std::exp(logits.at(i, j) - mx);
            expect += -(logits.at(i, t) - mx - std::log(z));
            ++n;
        }
        CHECK(got == doctest::Approx(expect / n).epsilon(1e-12));
    }
    SUBCASE("batch permutation leaves the loss unchanged") {
        std::mt19937_64 rng(7);
        Mat l1 = random_mat(3, 8, rng);
        Mat l2 = random_mat(2, 8, rng);
        double a = cross_entropy_loss({l1, l2}, {{4, 5, 6}, {7, kEosId}}, kPadId);
        double b = cross_entropy_loss({l2, l1}, {{7, kEosId}, {4, 5, 6}}, kPadId);
        CHECK(a == doctest::Approx(b).epsilon(1e-15));
    }
    SUBCASE("all-pad batch is an error") {
        Mat logits(2, 8);
        CHECK_THROWS_WITH_AS(cross_entropy_loss({logits}, {{kPadId, kPadId}}, kPadId),
                             doctest::Contains("padding"), ValidationError);
    }
}

TEST_CASE("xavier_init bounds and determinism") {
    DecoderModel a = tiny_model(42);
    DecoderModel b = tiny_model(42);
    DecoderModel c = tiny_model(43);

    bool any_diff = false;
    auto ra = tensor_registry(a);
    auto rb = tensor_registry(b);
    auto rc = tensor_registry(c);
    for (size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i].mat->v == rb[i].mat->v);
        if (ra[i].mat->v != rc[i].mat->v)
            any_diff = true;
        switch (ra[i].kind) {
            case TensorKind::Weight: {
                double bound = std::sqrt(6.0 / (ra[i].mat->rows + ra[i].mat->cols));
                for (double v : ra[i].mat->v)
                    CHECK(std::abs(v) <= bound);
                break;
            }
            case TensorKind::Bias:
                for (double v : ra[i].mat->v)
                    CHECK(v == 0.0);
                break;
            case TensorKind::Gain:
                for (double v : ra[i].mat->v)
                    CHECK(v == 1.0);
                break;
        }
    }
    CHECK(any_diff);

    // 4x4 matrix: bound sqrt(6/8)
    CHECK(std::sqrt(6.0 / 8.0) == doctest::Approx(0.8660254).epsilon(1e-6));
}

TEST_CASE("lr_schedule: warmup then linear decay to the base rate") {
    TrainConfig tc; // 10 warmup at 5e-5, 350 epochs, base 5e-6
    CHECK(lr_schedule(0, tc) == 5e-5);
    CHECK(lr_schedule(9, tc) == 5e-5);
    CHECK(lr_schedule(349, tc) == doctest::Approx(5e-6).epsilon(1e-15));
    CHECK(lr_schedule(10, tc) < 5e-5);
    CHECK(lr_schedule(200, tc) > lr_schedule(300, tc));

    TrainConfig half;
    half.warmup_epochs = 10;
    half.epochs = 20;
    CHECK(lr_schedule(14, half) ==
          doctest::Approx((half.warmup_lr + half.base_lr) / 2.0).epsilon(1e-15));

    CHECK_THROWS_AS(lr_schedule(350, tc), ValidationError);
    CHECK_THROWS_AS(lr_schedule(-1, tc), ValidationError);
}

TEST_CASE("full-model gradient check on the tiny config") {
    std::mt19937_64 rng(77);
    DecoderModel model = tiny_model(101);
    TrainBatch batch = tiny_batch(model.cfg, rng);

    DecoderModel grads = DecoderModel::zeros(model.cfg);
    double loss0 = compute_gradients(model, batch, grads);
    CHECK(std::isfinite(loss0));
    CHECK(loss0 == doctest::Approx(batch_loss(model, batch)).epsilon(1e-12));

    const double eps = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    auto pr = tensor_registry(model);
    auto gr = tensor_registry(grads);
    for (size_t k = 0; k < pr.size(); ++k) {
        Mat& p = *pr[k].mat;
        const Mat& g = *gr[k].mat;
        for (size_t i = 0; i < p.size(); ++i) {
            double saved = p.v[i];
            p.v[i] = saved + eps;
            double up = batch_loss(model, batch);
            p.v[i] = saved - eps;
            double dn = batch_loss(model, batch);
            p.v[i] = saved;
            double fd = (up - dn) / (2.0 * eps);
            double rel = std::abs(g.v[i] - fd) /
                         std::max({1e-3, std::abs(g.v[i]), std::abs(fd)});
            if (rel > worst) {
                worst = rel;
                worst_name = pr[k].name;
            }
        }
    }
    INFO("worst tensor: ", worst_name);
    CHECK(worst < 1e-4);
}

TEST_CASE("train_step descends and decays") {
    std::mt19937_64 rng(88);
    DecoderModel model = tiny_model(55);
    TrainBatch batch = tiny_batch(model.cfg, rng);

    SUBCASE("one small-lr step strictly decreases the loss") {
        TrainConfig tc;
        tc.warmup_epochs = 1;
        tc.epochs = 2;
        tc.warmup_lr = 1e-4;
        tc.base_lr = 1e-5;
        tc.weight_decay = 0.0;
        double before = batch_loss(model, batch);
        AdamState adam = AdamState::zeros(model.cfg);
        std::mt19937_64 step_rng(1);
        train_step(model, batch, adam, tc, 0, step_rng);
        double after = batch_loss(model, batch);
        CHECK(after < before);
    }
    SUBCASE("zero gradient leaves only the decoupled decay, exactly") {
        TrainConfig tc;
        tc.weight_decay = 0.01;
        tc.warmup_lr = 1e-3;
        DecoderModel grads = DecoderModel::zeros(model.cfg); // injected zero gradient
        AdamState adam = AdamState::zeros(model.cfg);
        DecoderModel before = model;
        const double lr = 1e-3;
        adamw_update(model, grads, adam, lr, tc);
        auto pb = tensor_registry(before);
        auto pa = tensor_registry(model);
        for (size_t k = 0; k < pa.size(); ++k)
            for (size_t i = 0; i < pa[k].mat->size(); ++i)
                CHECK(pa[k].mat->v[i] == pb[k].mat->v[i] * (1.0 - lr * tc.weight_decay));
    }
    SUBCASE("training is deterministic per seed") {
        TrainConfig tc;
        tc.warmup_epochs = 2;
        tc.epochs = 4;
        tc.warmup_lr = 1e-3;
        tc.base_lr = 1e-4;
        auto run = [&]() {
            DecoderModel m = tiny_model(55);
            AdamState adam = AdamState::zeros(m.cfg);
            std::mt19937_64 r(123);
            for (int epoch = 0; epoch < 4; ++epoch)
                train_step(m, batch, adam, tc, epoch, r);
            return m;
        };
        DecoderModel m1 = run();
        DecoderModel m2 = run();
        auto r1 = tensor_registry(m1);
        auto r2 = tensor_registry(m2);
        for (size_t k = 0; k < r1.size(); ++k)
            CHECK(r1[k].mat->v == r2[k].mat->v);
    }
}

TEST_CASE("dropout fires in train mode only and is seed-deterministic") {
    std::mt19937_64 rng(61);
    DecoderConfig cfg = tiny_config();
    cfg.dropout = 0.3;
    DecoderModel model = DecoderModel::zeros(cfg);
    xavier_init(model, 5);
    Mat memory = random_mat(3, cfg.d_model, rng);
    std::vector<char> mem_pad(3, 0);
    std::vector<int> tokens{kBosId, 4, 5};

    Mat eval_out = decoder_forward(model, tokens, memory, mem_pad, false, nullptr);
    std::mt19937_64 r1(5), r2(5), r3(6);
    Mat t1 = decoder_forward(model, tokens, memory, mem_pad, true, &r1);
    Mat t2 = decoder_forward(model, tokens, memory, mem_pad, true, &r2);
    Mat t3 = decoder_forward(model, tokens, memory, mem_pad, true, &r3);
    CHECK(t1.v == t2.v);      // same rng state, same masks
    CHECK(t1.v != eval_out.v); // masks were applied
    CHECK(t3.v != t1.v);       // different draws, different masks
    CHECK_THROWS_WITH_AS(decoder_forward(model, tokens, memory, mem_pad, true, nullptr),
                         doctest::Contains("RNG"), ValidationError);

    SUBCASE("training with dropout stays finite and seed-deterministic") {
        TrainBatch batch = tiny_batch(cfg, rng);
        TrainConfig tc;
        tc.warmup_epochs = 1;
        tc.epochs = 3;
        tc.warmup_lr = 1e-3;
        tc.base_lr = 1e-4;
        auto run = [&]() {
            DecoderModel m = DecoderModel::zeros(cfg);
            xavier_init(m, 5);
            AdamState adam = AdamState::zeros(cfg);
            std::mt19937_64 r(9);
            double loss = 0.0;
            for (int e = 0; e < 3; ++e)
                loss = train_step(m, batch, adam, tc, e, r);
            CHECK(std::isfinite(loss));
            return m;
        };
        DecoderModel m1 = run();
        DecoderModel m2 = run();
        auto reg1 = tensor_registry(m1);
        auto reg2 = tensor_registry(m2);
        for (size_t k = 0; k < reg1.size(); ++k)
            CHECK(reg1[k].mat->v == reg2[k].mat->v);
    }
}

TEST_CASE("train_step error paths") {
    std::mt19937_64 rng(62);
    DecoderModel model = tiny_model(3);
    TrainConfig tc;
    AdamState adam = AdamState::zeros(model.cfg);

    SUBCASE("all-pad batch") {
        TrainBatch batch = tiny_batch(model.cfg, rng);
        for (auto& item : batch)
            std::fill(item.target.begin(), item.target.end(), kPadId);
        std::mt19937_64 r(1);
        CHECK_THROWS_WITH_AS(train_step(model, batch, adam, tc, 0, r),
                             doctest::Contains("padding"), ValidationError);
    }
    SUBCASE("non-finite loss is reported") {
        TrainBatch batch = tiny_batch(model.cfg, rng);
        model.head_b.at(0, 0) = std::numeric_limits<double>::infinity();
        std::mt19937_64 r(1);
        CHECK_THROWS_WITH_AS(train_step(model, batch, adam, tc, 0, r),
                             doctest::Contains("non-finite"), ValidationError);
    }
}

TEST_CASE("greedy_decode is deterministic and bounded") {
    std::mt19937_64 rng(9);
    DecoderModel model = tiny_model(31);
    Mat memory = random_mat(4, 8, rng);
    std::vector<char> mem_pad(4, 0);

    auto a = greedy_decode(model, memory, mem_pad, kBosId, kEosId);
    auto b = greedy_decode(model, memory, mem_pad, kBosId, kEosId);
    CHECK(a == b);
    CHECK(a.size() <= static_cast<size_t>(model.cfg.max_len));
    CHECK(a.front() == kBosId);
}

TEST_CASE("tokenizer rules and round-trip") {
    Vocab v = Vocab::from_tokens({"lung", ",", "biopsy", "squamous", "cell", "carcinoma", ";"});

    SUBCASE("punctuation splits into single-character tokens") {
        auto ids = tokenize("Lung, biopsy", v);
        REQUIRE(ids.size() == 3);
        CHECK(ids[0] == v.id_of("lung"));
        CHECK(ids[1] == v.id_of(","));
        CHECK(ids[2] == v.id_of("biopsy"));
    }
    SUBCASE("round-trip on in-vocab text") {
        std::string norm = "lung , biopsy ; squamous cell carcinoma";
        CHECK(detokenize(tokenize(norm, v), v) == norm);
    }
    SUBCASE("out-of-vocab words map to UNK") {
        auto ids = tokenize("lung adenocarcinoma", v);
        REQUIRE(ids.size() == 2);
        CHECK(ids[1] == kUnkId);
    }
    SUBCASE("vocab file round-trip and validation") {
        TempDir td;
        v.save(td / "vocab.txt");
        Vocab loaded = Vocab::load(td / "vocab.txt");
        CHECK(loaded.size() == v.size());
        CHECK(loaded.id_of("carcinoma") == v.id_of("carcinoma"));
        CHECK(loaded.token_of(kPadId) == "<pad>");

        std::ofstream bad(td / "bad.txt");
        bad << "<pad>\n<bos>\n";
        bad.close();
        CHECK_THROWS_WITH_AS(Vocab::load(td / "bad.txt"), doctest::Contains("reserve"),
                             ValidationError);
        CHECK_THROWS_AS(Vocab::load(td / "missing.txt"), IoError);
    }
}

TEST_CASE("checkpoint round-trip is byte-identical on the second write") {
    TempDir td;
    DecoderModel model = tiny_model(77);
    save_checkpoint(model, td / "m.wsdm");
    DecoderModel back = load_checkpoint(td / "m.wsdm");
    CHECK(back.cfg.layers == model.cfg.layers);
    CHECK(back.cfg.vocab == model.cfg.vocab);
    save_checkpoint(back, td / "m2.wsdm");

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::vector<uint8_t>{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    };
    CHECK(slurp(td / "m.wsdm") == slurp(td / "m2.wsdm"));

    SUBCASE("corrupted magic") {
        auto bytes = slurp(td / "m.wsdm");
        bytes[0] = 'Z';
        std::ofstream(td / "bad.wsdm", std::ios::binary)
            .write(reinterpret_cast<char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(load_checkpoint(td / "bad.wsdm"), doctest::Contains("magic"),
                             ValidationError);
    }
    SUBCASE("corrupted tensor byte fails the checksum") {
        auto bytes = slurp(td / "m.wsdm");
        bytes[bytes.size() / 2] ^= 1;
        std::ofstream(td / "crc.wsdm", std::ios::binary)
            .write(reinterpret_cast<char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_WITH_AS(load_checkpoint(td / "crc.wsdm"), doctest::Contains("checksum"),
                             ValidationError);
    }
    SUBCASE("missing checkpoint is an I/O error") {
        CHECK_THROWS_AS(load_checkpoint(td / "none.wsdm"), IoError);
    }
}

TEST_CASE("decoder config validation") {
    DecoderConfig cfg = tiny_config();
    cfg.heads = 3; // 8 % 3 != 0
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = tiny_config();
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = tiny_config();
    cfg.max_len = 1;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
