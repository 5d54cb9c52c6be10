#include "wsireport/decoder.hpp"
#include "wsireport/binio.hpp"
#include "wsireport/errors.hpp"
#include "wsireport/rng.hpp"
#include "wsireport/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsireport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLnEps = 1e-5;

} // namespace

void DecoderConfig::validate() const {
    if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || feat_dim < 1)
        throw ValidationError("decoder dimensions must be >= 1");
    if (d_model % heads != 0)
        throw ValidationError("d_model must be divisible by heads");
    if (max_len < 2)
        throw ValidationError("max_len must be >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ValidationError("dropout must be in [0,1)");
    if (vocab <= kUnkId + 1)
        throw ValidationError("vocab must leave room for content ids after PAD/BOS/EOS/UNK");
}

void TrainConfig::validate() const {
    if (warmup_lr <= 0 || base_lr <= 0)
        throw ValidationError("learning rates must be > 0");
    if (warmup_epochs < 0 || epochs < 1 || warmup_epochs > epochs)
        throw ValidationError("need 0 <= warmup_epochs <= epochs and epochs >= 1");
    if (batch < 1)
        throw ValidationError("batch must be >= 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
        throw ValidationError("adam betas must be in [0,1)");
    if (adam_eps <= 0 || weight_decay < 0)
        throw ValidationError("adam_eps must be > 0 and weight_decay >= 0");
}

DecoderModel DecoderModel::zeros(const DecoderConfig& cfg) {
    cfg.validate();
    DecoderModel m;
    m.cfg = cfg;
    m.proj_w = Mat(cfg.feat_dim, cfg.d_model);
    m.proj_b = Mat(1, cfg.d_model);
    m.embed = Mat(cfg.vocab, cfg.d_model);
    m.layers.resize(static_cast<size_t>(cfg.layers));
    for (auto& L : m.layers) {
        for (AttentionParams* at : {&L.self_attn, &L.cross_attn}) {
            at->wq = Mat(cfg.d_model, cfg.d_model);
            at->bq = Mat(1, cfg.d_model);
            at->wk = Mat(cfg.d_model, cfg.d_model);
            at->bk = Mat(1, cfg.d_model);
            at->wv = Mat(cfg.d_model, cfg.d_model);
            at->bv = Mat(1, cfg.d_model);
            at->wo = Mat(cfg.d_model, cfg.d_model);
            at->bo = Mat(1, cfg.d_model);
        }
        L.ffn_w1 = Mat(cfg.d_model, cfg.d_ff);
        L.ffn_b1 = Mat(1, cfg.d_ff);
        L.ffn_w2 = Mat(cfg.d_ff, cfg.d_model);
        L.ffn_b2 = Mat(1, cfg.d_model);
        L.ln1_g = Mat(1, cfg.d_model);
        L.ln1_b = Mat(1, cfg.d_model);
        L.ln2_g = Mat(1, cfg.d_model);
        L.ln2_b = Mat(1, cfg.d_model);
        L.ln3_g = Mat(1, cfg.d_model);
        L.ln3_b = Mat(1, cfg.d_model);
    }
    m.head_w = Mat(cfg.d_model, cfg.vocab);
    m.head_b = Mat(1, cfg.vocab);
    m.pe = positional_encoding(cfg.max_len, cfg.d_model);
    return m;
}

std::vector<TensorRef> tensor_registry(DecoderModel& m) {
    std::vector<TensorRef> out;
    auto add = [&](Mat& mat, TensorKind kind, const std::string& name) {
        out.push_back({&mat, kind, name});
    };
    add(m.proj_w, TensorKind::Weight, "proj_w");
    add(m.proj_b, TensorKind::Bias, "proj_b");
    add(m.embed, TensorKind::Weight, "embed");
    for (size_t l = 0; l < m.layers.size(); ++l) {
        LayerParams& L = m.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        auto add_attn = [&](AttentionParams& a, const std::string& tag) {
            add(a.wq, TensorKind::Weight, pre + tag + ".wq");
            add(a.bq, TensorKind::Bias, pre + tag + ".bq");
            add(a.wk, TensorKind::Weight, pre + tag + ".wk");
            add(a.bk, TensorKind::Bias, pre + tag + ".bk");
            add(a.wv, TensorKind::Weight, pre + tag + ".wv");
            add(a.bv, TensorKind::Bias, pre + tag + ".bv");
            add(a.wo, TensorKind::Weight, pre + tag + ".wo");
            add(a.bo, TensorKind::Bias, pre + tag + ".bo");
        };
        add_attn(L.self_attn, "self");
        add_attn(L.cross_attn, "cross");
        add(L.ffn_w1, TensorKind::Weight, pre + "ffn_w1");
        add(L.ffn_b1, TensorKind::Bias, pre + "ffn_b1");
        add(L.ffn_w2, TensorKind::Weight, pre + "ffn_w2");
        add(L.ffn_b2, TensorKind::Bias, pre + "ffn_b2");
        add(L.ln1_g, TensorKind::Gain, pre + "ln1_g");
        add(L.ln1_b, TensorKind::Bias, pre + "ln1_b");
        add(L.ln2_g, TensorKind::Gain, pre + "ln2_g");
        add(L.ln2_b, TensorKind::Bias, pre + "ln2_b");
        add(L.ln3_g, TensorKind::Gain, pre + "ln3_g");
        add(L.ln3_b, TensorKind::Bias, pre + "ln3_b");
    }
    add(m.head_w, TensorKind::Weight, "head_w");
    add(m.head_b, TensorKind::Bias, "head_b");
    return out;
}

AdamState AdamState::zeros(const DecoderConfig& cfg) {
    AdamState s;
    s.m = DecoderModel::zeros(cfg);
    s.v = DecoderModel::zeros(cfg);
    return s;
}

Mat project_features(const Mat& f, const Mat& w_p, const Mat& b_p) {
    if (f.cols != w_p.rows || w_p.cols != b_p.cols || b_p.rows != 1)
        throw ValidationError("project_features shape mismatch");
    Mat m = matmul(f, w_p);
    for (int i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j)
            r[j] += b_p.at(0, j);
    }
    return m;
}

Mat project_features(const FeatureMatrix& f, const Mat& w_p, const Mat& b_p) {
    Mat x(static_cast<int>(f.n), f.dim);
    for (int64_t i = 0; i < f.n; ++i)
        for (int j = 0; j < f.dim; ++j)
            x.at(static_cast<int>(i), j) = static_cast<double>(f.row(i)[j]);
    return project_features(x, w_p, b_p);
}

Mat positional_encoding(int max_len, int d_model) {
    if (d_model % 2 != 0)
        throw ValidationError("positional encoding requires an even d_model");
    if (max_len < 1)
        throw ValidationError("positional encoding requires max_len >= 1");
    Mat pe(max_len, d_model);
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; 2 * i < d_model; ++i) {
            double arg = pos / std::pow(10000.0, 2.0 * i / d_model);
            pe.at(pos, 2 * i) = std::sin(arg);
            pe.at(pos, 2 * i + 1) = std::cos(arg);
        }
    }
    return pe;
}

Mat causal_mask(int len) {
    if (len < 1)
        throw ValidationError("causal_mask requires len >= 1");
    Mat m(len, len);
    for (int i = 0; i < len; ++i)
        for (int j = 0; j < len; ++j)
            m.at(i, j) = i >= j ? 0.0 : -kInf;
    return m;
}

namespace {

// Row-wise softmax of scores (in place) with max subtraction. Entries at
// -inf become exact zeros, so masked positions cannot influence anything
// downstream, bit for bit.
void softmax_rows(Mat& scores) {
    for (int i = 0; i < scores.rows; ++i) {
        double* r = scores.row(i);
        double mx = -kInf;
        for (int j = 0; j < scores.cols; ++j)
            mx = std::max(mx, r[j]);
        if (mx == -kInf)
            throw ValidationError("attention row is fully masked");
        double sum = 0.0;
        for (int j = 0; j < scores.cols; ++j) {
            r[j] = r[j] == -kInf ? 0.0 : std::exp(r[j] - mx);
            sum += r[j];
        }
        for (int j = 0; j < scores.cols; ++j)
            r[j] /= sum;
    }
}

Mat linear(const Mat& x, const Mat& w, const Mat& b) {
    Mat y = matmul(x, w);
    for (int i = 0; i < y.rows; ++i) {
        double* r = y.row(i);
        for (int j = 0; j < y.cols; ++j)
            r[j] += b.at(0, j);
    }
    return y;
}

void add_col_sums(Mat& acc, const Mat& d) {
    for (int i = 0; i < d.rows; ++i) {
        const double* r = d.row(i);
        for (int j = 0; j < d.cols; ++j)
            acc.at(0, j) += r[j];
    }
}

struct AttnCache {
    Mat q, k, v;            // post-bias projections
    std::vector<Mat> probs; // per head, n_q x n_k
    Mat ctx;                // concatenated head outputs, n_q x d_model
    Mat out;                // after the output projection, pre-dropout
};

// Multi-head attention. Exactly one of add_mask (self) or kv_pad (cross)
// is normally present; both null means unmasked.
AttnCache mha_forward(const AttentionParams& p, const Mat& q_in, const Mat& kv_in,
                      const Mat* add_mask, const std::vector<char>* kv_pad, int heads) {
    AttnCache c;
    c.q = linear(q_in, p.wq, p.bq);
    c.k = linear(kv_in, p.wk, p.bk);
    c.v = linear(kv_in, p.wv, p.bv);
    const int d_model = c.q.cols;
    const int dk = d_model / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const int n_q = c.q.rows;
    const int n_k = c.k.rows;

    c.ctx = Mat(n_q, d_model);
    c.probs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        const int cs = h * dk;
        Mat scores(n_q, n_k);
        for (int i = 0; i < n_q; ++i) {
            const double* qr = c.q.row(i) + cs;
            for (int j = 0; j < n_k; ++j) {
                if (kv_pad && (*kv_pad)[static_cast<size_t>(j)]) {
                    scores.at(i, j) = -kInf;
                    continue;
                }
                const double* kr = c.k.row(j) + cs;
                double s = 0.0;
                for (int t = 0; t < dk; ++t)
                    s += qr[t] * kr[t];
                s *= scale;
                if (add_mask)
                    s += add_mask->at(i, j);
                scores.at(i, j) = s;
            }
        }
        softmax_rows(scores);
        for (int i = 0; i < n_q; ++i) {
            double* out = c.ctx.row(i) + cs;
            const double* pr = scores.row(i);
            for (int j = 0; j < n_k; ++j) {
                double w = pr[j];
                if (w == 0.0)
                    continue;
                const double* vr = c.v.row(j) + cs;
                for (int t = 0; t < dk; ++t)
                    out[t] += w * vr[t];
            }
        }
        c.probs.push_back(std::move(scores));
    }
    c.out = linear(c.ctx, p.wo, p.bo);
    return c;
}

struct AttnGrads {
    Mat* wq;
    Mat* bq;
    Mat* wk;
    Mat* bk;
    Mat* wv;
    Mat* bv;
    Mat* wo;
    Mat* bo;
};

// Backward through multi-head attention. Accumulates parameter grads and
// adds input gradients into d_q_in / d_kv_in (which may alias).
void mha_backward(const AttentionParams& p, const AttnCache& c, const Mat& q_in,
                  const Mat& kv_in, const Mat& d_out, int heads, AttnGrads g, Mat& d_q_in,
                  Mat& d_kv_in) {
    const int d_model = c.q.cols;
    const int dk = d_model / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const int n_q = c.q.rows;
    const int n_k = c.k.rows;

    // output projection
    Mat d_ctx(n_q, d_model);
    addmul_tb(d_ctx, d_out, p.wo);
    addmul_ta(*g.wo, c.ctx, d_out);
    add_col_sums(*g.bo, d_out);

    Mat dq(n_q, d_model);
    Mat dkm(n_k, d_model);
    Mat dvm(n_k, d_model);
    for (int h = 0; h < heads; ++h) {
        const int cs = h * dk;
        const Mat& probs = c.probs[static_cast<size_t>(h)];
        // dP and dV
        Mat dp(n_q, n_k);
        for (int i = 0; i < n_q; ++i) {
            const double* dctx = d_ctx.row(i) + cs;
            const double* pr = probs.row(i);
            for (int j = 0; j < n_k; ++j) {
                const double* vr = c.v.row(j) + cs;
                double s = 0.0;
                for (int t = 0; t < dk; ++t)
                    s += dctx[t] * vr[t];
                dp.at(i, j) = s;
                double w = pr[j];
                if (w != 0.0) {
                    double* dvr = dvm.row(j) + cs;
                    for (int t = 0; t < dk; ++t)
                        dvr[t] += w * dctx[t];
                }
            }
        }
        // softmax backward: dS = P .* (dP - rowsum(dP .* P))
        for (int i = 0; i < n_q; ++i) {
            const double* pr = probs.row(i);
            double* dpr = dp.row(i);
            double dot = 0.0;
            for (int j = 0; j < n_k; ++j)
                dot += dpr[j] * pr[j];
            for (int j = 0; j < n_k; ++j)
                dpr[j] = pr[j] * (dpr[j] - dot);
        }
        // dQ and dK
        for (int i = 0; i < n_q; ++i) {
            const double* dsr = dp.row(i);
            double* dqr = dq.row(i) + cs;
            const double* qr = c.q.row(i) + cs;
            for (int j = 0; j < n_k; ++j) {
                double ds = dsr[j] * scale;
                if (ds == 0.0)
                    continue;
                const double* kr = c.k.row(j) + cs;
                double* dkr = dkm.row(j) + cs;
                for (int t = 0; t < dk; ++t) {
                    dqr[t] += ds * kr[t];
                    dkr[t] += ds * qr[t];
                }
            }
        }
    }

    addmul_tb(d_q_in, dq, p.wq);
    addmul_ta(*g.wq, q_in, dq);
    add_col_sums(*g.bq, dq);
    addmul_tb(d_kv_in, dkm, p.wk);
    addmul_ta(*g.wk, kv_in, dkm);
    add_col_sums(*g.bk, dkm);
    addmul_tb(d_kv_in, dvm, p.wv);
    addmul_ta(*g.wv, kv_in, dvm);
    add_col_sums(*g.bv, dvm);
}

struct LnCache {
    Mat xhat;
    std::vector<double> inv_std;
};

Mat ln_forward(const Mat& x, const Mat& gain, const Mat& bias, LnCache& c) {
    const int d = x.cols;
    Mat y(x.rows, d);
    c.xhat = Mat(x.rows, d);
    c.inv_std.resize(static_cast<size_t>(x.rows));
    for (int i = 0; i < x.rows; ++i) {
        const double* r = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < d; ++j)
            mean += r[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j)
            var += (r[j] - mean) * (r[j] - mean);
        var /= d;
        double inv = 1.0 / std::sqrt(var + kLnEps);
        c.inv_std[static_cast<size_t>(i)] = inv;
        for (int j = 0; j < d; ++j) {
            double xh = (r[j] - mean) * inv;
            c.xhat.at(i, j) = xh;
            y.at(i, j) = gain.at(0, j) * xh + bias.at(0, j);
        }
    }
    return y;
}

Mat ln_backward(const Mat& d_y, const LnCache& c, const Mat& gain, Mat& d_gain, Mat& d_bias) {
    const int d = d_y.cols;
    Mat dx(d_y.rows, d);
    for (int i = 0; i < d_y.rows; ++i) {
        const double* dyr = d_y.row(i);
        const double* xh = c.xhat.row(i);
        double inv = c.inv_std[static_cast<size_t>(i)];
        double s1 = 0.0;
        double s2 = 0.0;
        for (int j = 0; j < d; ++j) {
            double dxh = dyr[j] * gain.at(0, j);
            s1 += dxh;
            s2 += dxh * xh[j];
            d_gain.at(0, j) += dyr[j] * xh[j];
            d_bias.at(0, j) += dyr[j];
        }
        for (int j = 0; j < d; ++j) {
            double dxh = dyr[j] * gain.at(0, j);
            dx.at(i, j) = inv * (dxh - s1 / d - xh[j] * s2 / d);
        }
    }
    return dx;
}

// Inverted dropout: kept entries are scaled by 1/keep at train time.
void dropout_forward(Mat& x, double p, std::mt19937_64& rng, std::vector<uint8_t>& mask) {
    const double keep = 1.0 - p;
    mask.assign(x.size(), 1);
    for (size_t i = 0; i < x.size(); ++i) {
        if (unit_uniform(rng) < p) {
            mask[i] = 0;
            x.v[i] = 0.0;
        } else {
            x.v[i] /= keep;
        }
    }
}

void dropout_backward(Mat& dx, double p, const std::vector<uint8_t>& mask) {
    const double keep = 1.0 - p;
    for (size_t i = 0; i < dx.size(); ++i)
        dx.v[i] = mask[i] ? dx.v[i] / keep : 0.0;
}

struct LayerCache {
    Mat x_in;
    AttnCache self_at;
    std::vector<uint8_t> self_drop;
    LnCache ln1;
    Mat x1;
    AttnCache cross_at;
    std::vector<uint8_t> cross_drop;
    LnCache ln2;
    Mat x2;
    Mat ffn_pre, ffn_act, ffn_out;
    std::vector<uint8_t> ffn_drop;
    LnCache ln3;
    Mat x3;
};

struct ForwardCache {
    Mat x0;
    std::vector<LayerCache> layers;
    Mat final_h;
};

void check_forward_inputs(const DecoderModel& model, const std::vector<int>& tokens,
                          const Mat& memory, const std::vector<char>& mem_pad) {
    const DecoderConfig& cfg = model.cfg;
    if (tokens.empty())
        throw ValidationError("decoder_forward requires at least one token");
    if (static_cast<int>(tokens.size()) > cfg.max_len)
        throw ValidationError("sequence length " + std::to_string(tokens.size()) +
                              " exceeds max_len " + std::to_string(cfg.max_len));
    for (int id : tokens)
        if (id < 0 || id >= cfg.vocab)
            throw ValidationError("token id " + std::to_string(id) + " outside vocab");
    if (memory.rows < 1)
        throw ValidationError("memory must have at least one row");
    if (memory.cols != cfg.d_model)
        throw ValidationError("memory width must equal d_model");
    if (mem_pad.size() != static_cast<size_t>(memory.rows))
        throw ValidationError("mem_pad length must equal the memory row count");
    bool any_visible = false;
    for (char p : mem_pad)
        any_visible = any_visible || !p;
    if (!any_visible)
        throw ValidationError("all memory rows are padded");
}

Mat forward_cached(const DecoderModel& model, const std::vector<int>& tokens,
                   const Mat& memory, const std::vector<char>& mem_pad, bool train,
                   std::mt19937_64* rng, ForwardCache* fc) {
    check_forward_inputs(model, tokens, memory, mem_pad);
    const DecoderConfig& cfg = model.cfg;
    const int L = static_cast<int>(tokens.size());
    const bool use_dropout = train && cfg.dropout > 0.0;
    if (use_dropout && !rng)
        throw ValidationError("train-mode forward with dropout needs an RNG");

    Mat x(L, cfg.d_model);
    for (int i = 0; i < L; ++i) {
        const double* e = model.embed.row(tokens[static_cast<size_t>(i)]);
        const double* pe = model.pe.row(i);
        double* r = x.row(i);
        for (int j = 0; j < cfg.d_model; ++j)
            r[j] = e[j] + pe[j];
    }
    if (fc)
        fc->x0 = x;

    Mat causal = causal_mask(L);
    if (fc)
        fc->layers.resize(static_cast<size_t>(cfg.layers));

    for (int l = 0; l < cfg.layers; ++l) {
        const LayerParams& P = model.layers[static_cast<size_t>(l)];
        LayerCache* lc = fc ? &fc->layers[static_cast<size_t>(l)] : nullptr;
        if (lc)
            lc->x_in = x;

        // masked self-attention
        AttnCache sa = mha_forward(P.self_attn, x, x, &causal, nullptr, cfg.heads);
        Mat a = sa.out;
        std::vector<uint8_t> sdrop;
        if (use_dropout)
            dropout_forward(a, cfg.dropout, *rng, sdrop);
        for (size_t i = 0; i < a.size(); ++i)
            a.v[i] += x.v[i]; // residual
        LnCache ln1;
        Mat x1 = ln_forward(a, P.ln1_g, P.ln1_b, ln1);

        // cross-attention over visual memory
        AttnCache ca = mha_forward(P.cross_attn, x1, memory, nullptr, &mem_pad, cfg.heads);
        Mat c = ca.out;
        std::vector<uint8_t> cdrop;
        if (use_dropout)
            dropout_forward(c, cfg.dropout, *rng, cdrop);
        for (size_t i = 0; i < c.size(); ++i)
            c.v[i] += x1.v[i];
        LnCache ln2;
        Mat x2 = ln_forward(c, P.ln2_g, P.ln2_b, ln2);

        // position-wise feed-forward (ReLU)
        Mat pre = linear(x2, P.ffn_w1, P.ffn_b1);
        Mat act = pre;
        for (double& vv : act.v)
            vv = vv > 0.0 ? vv : 0.0;
        Mat f = linear(act, P.ffn_w2, P.ffn_b2);
        std::vector<uint8_t> fdrop;
        if (use_dropout)
            dropout_forward(f, cfg.dropout, *rng, fdrop);
        for (size_t i = 0; i < f.size(); ++i)
            f.v[i] += x2.v[i];
        LnCache ln3;
        Mat x3 = ln_forward(f, P.ln3_g, P.ln3_b, ln3);

        if (lc) {
            lc->self_at = std::move(sa);
            lc->self_drop = std::move(sdrop);
            lc->ln1 = std::move(ln1);
            lc->x1 = x1;
            lc->cross_at = std::move(ca);
            lc->cross_drop = std::move(cdrop);
            lc->ln2 = std::move(ln2);
            lc->x2 = x2;
            lc->ffn_pre = std::move(pre);
            lc->ffn_act = std::move(act);
            lc->ffn_out = f; // residual sum; pre-LN3 input
            lc->ffn_drop = std::move(fdrop);
            lc->ln3 = std::move(ln3);
            lc->x3 = x3;
        }
        x = std::move(x3);
    }

    if (fc)
        fc->final_h = x;
    return linear(x, model.head_w, model.head_b);
}

} // namespace

Mat attention(const Mat& q, const Mat& k, const Mat& v, const Mat& add_mask) {
    if (q.cols != k.cols)
        throw ValidationError("attention: Q and K widths differ");
    if (k.rows != v.rows)
        throw ValidationError("attention: K and V row counts differ");
    if (add_mask.rows != q.rows || add_mask.cols != k.rows)
        throw ValidationError("attention: mask must be n_q x n_k");
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
    Mat scores(q.rows, k.rows);
    for (int i = 0; i < q.rows; ++i)
        for (int j = 0; j < k.rows; ++j) {
            double s = 0.0;
            for (int t = 0; t < q.cols; ++t)
                s += q.at(i, t) * k.at(j, t);
            scores.at(i, j) = s * scale + add_mask.at(i, j);
        }
    softmax_rows(scores);
    return matmul(scores, v);
}

Mat decoder_forward(const DecoderModel& model, const std::vector<int>& tokens,
                    const Mat& memory, const std::vector<char>& mem_pad, bool train,
                    std::mt19937_64* rng) {
    return forward_cached(model, tokens, memory, mem_pad, train, rng, nullptr);
}

double cross_entropy_loss(const std::vector<Mat>& logits,
                          const std::vector<std::vector<int>>& targets, int pad_id) {
    if (logits.size() != targets.size())
        throw ValidationError("cross_entropy_loss: batch sizes differ");
    double sum = 0.0;
    int64_t count = 0;
    for (size_t b = 0; b < logits.size(); ++b) {
        const Mat& lg = logits[b];
        const auto& tg = targets[b];
        if (lg.rows != static_cast<int>(tg.size()))
            throw ValidationError("cross_entropy_loss: logits rows != target length");
        for (int i = 0; i < lg.rows; ++i) {
            int t = tg[static_cast<size_t>(i)];
            if (t == pad_id)
                continue;
            if (t < 0 || t >= lg.cols)
                throw ValidationError("cross_entropy_loss: target id out of range");
            const double* r = lg.row(i);
            double mx = r[0];
            for (int j = 1; j < lg.cols; ++j)
                mx = std::max(mx, r[j]);
            double acc = 0.0;
            for (int j = 0; j < lg.cols; ++j)
                acc += std::exp(r[j] - mx);
            sum += mx + std::log(acc) - r[t];
            ++count;
        }
    }
    if (count == 0)
        throw ValidationError("cross_entropy_loss: every target position is padding");
    return sum / static_cast<double>(count);
}

void xavier_init(DecoderModel& model, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const TensorRef& t : tensor_registry(model)) {
        switch (t.kind) {
            case TensorKind::Weight: {
                double bound = std::sqrt(6.0 / (t.mat->rows + t.mat->cols));
                for (double& v : t.mat->v)
                    v = (2.0 * unit_uniform(rng) - 1.0) * bound;
                break;
            }
            case TensorKind::Bias:
                t.mat->zero();
                break;
            case TensorKind::Gain:
                std::fill(t.mat->v.begin(), t.mat->v.end(), 1.0);
                break;
        }
    }
}

double lr_schedule(int epoch, const TrainConfig& tc) {
    tc.validate();
    if (epoch < 0 || epoch >= tc.epochs)
        throw ValidationError("epoch out of range for lr_schedule");
    if (epoch < tc.warmup_epochs)
        return tc.warmup_lr;
    double t = static_cast<double>(epoch - tc.warmup_epochs + 1) /
               static_cast<double>(tc.epochs - tc.warmup_epochs);
    return tc.warmup_lr + (tc.base_lr - tc.warmup_lr) * t;
}

double batch_loss(const DecoderModel& model, const TrainBatch& batch) {
    std::vector<Mat> logits;
    std::vector<std::vector<int>> targets;
    for (const TrainItem& item : batch) {
        Mat mem = project_features(item.features, model.proj_w, model.proj_b);
        logits.push_back(decoder_forward(model, item.input, mem, item.mem_pad, false, nullptr));
        targets.push_back(item.target);
    }
    return cross_entropy_loss(logits, targets, kPadId);
}

double compute_gradients(const DecoderModel& model, const TrainBatch& batch,
                         DecoderModel& grads, bool train_dropout, std::mt19937_64* rng) {
    const DecoderConfig& cfg = model.cfg;
    int64_t total = 0;
    for (const TrainItem& item : batch) {
        if (item.input.size() != item.target.size())
            throw ValidationError("train item input/target lengths differ");
        for (int t : item.target)
            total += t != kPadId ? 1 : 0;
    }
    if (total == 0)
        throw ValidationError("batch has only padding targets");
    const double inv_total = 1.0 / static_cast<double>(total);

    double loss_sum = 0.0;
    for (const TrainItem& item : batch) {
        Mat mem = project_features(item.features, model.proj_w, model.proj_b);
        ForwardCache fc;
        Mat logits = forward_cached(model, item.input, mem, item.mem_pad,
                                    train_dropout && cfg.dropout > 0.0, rng, &fc);
        const int L = logits.rows;

        // loss and dLogits = (softmax - onehot) / total at non-pad rows
        Mat dlogits(L, cfg.vocab);
        for (int i = 0; i < L; ++i) {
            int t = item.target[static_cast<size_t>(i)];
            if (t == kPadId)
                continue;
            if (t < 0 || t >= cfg.vocab)
                throw ValidationError("target id out of range");
            const double* r = logits.row(i);
            double mx = r[0];
            for (int j = 1; j < cfg.vocab; ++j)
                mx = std::max(mx, r[j]);
            double acc = 0.0;
            for (int j = 0; j < cfg.vocab; ++j)
                acc += std::exp(r[j] - mx);
            loss_sum += mx + std::log(acc) - r[t];
            double* dr = dlogits.row(i);
            for (int j = 0; j < cfg.vocab; ++j)
                dr[j] = std::exp(r[j] - mx) / acc * inv_total;
            dr[t] -= inv_total;
        }

        // output head
        Mat dx(L, cfg.d_model);
        addmul_tb(dx, dlogits, model.head_w);
        addmul_ta(grads.head_w, fc.final_h, dlogits);
        add_col_sums(grads.head_b, dlogits);

        Mat dmem(mem.rows, mem.cols);
        for (int l = cfg.layers - 1; l >= 0; --l) {
            const LayerParams& P = model.layers[static_cast<size_t>(l)];
            LayerParams& G = grads.layers[static_cast<size_t>(l)];
            LayerCache& lc = fc.layers[static_cast<size_t>(l)];

            // LN3 <- ffn residual block
            Mat dr3 = ln_backward(dx, lc.ln3, P.ln3_g, G.ln3_g, G.ln3_b);
            Mat dffn = dr3; // branch into the ffn path
            if (!lc.ffn_drop.empty())
                dropout_backward(dffn, cfg.dropout, lc.ffn_drop);
            Mat dact(dffn.rows, cfg.d_ff);
            addmul_tb(dact, dffn, P.ffn_w2);
            addmul_ta(G.ffn_w2, lc.ffn_act, dffn);
            add_col_sums(G.ffn_b2, dffn);
            for (size_t i = 0; i < dact.size(); ++i)
                if (lc.ffn_pre.v[i] <= 0.0)
                    dact.v[i] = 0.0;
            Mat dx2 = dr3; // residual path
            addmul_tb(dx2, dact, P.ffn_w1);
            addmul_ta(G.ffn_w1, lc.x2, dact);
            add_col_sums(G.ffn_b1, dact);

            // LN2 <- cross-attention residual block
            Mat dr2 = ln_backward(dx2, lc.ln2, P.ln2_g, G.ln2_g, G.ln2_b);
            Mat dcr = dr2;
            if (!lc.cross_drop.empty())
                dropout_backward(dcr, cfg.dropout, lc.cross_drop);
            Mat dx1 = dr2; // residual path
            AttnGrads cg{&G.cross_attn.wq, &G.cross_attn.bq, &G.cross_attn.wk,
                         &G.cross_attn.bk, &G.cross_attn.wv, &G.cross_attn.bv,
                         &G.cross_attn.wo, &G.cross_attn.bo};
            mha_backward(P.cross_attn, lc.cross_at, lc.x1, mem, dcr, cfg.heads, cg, dx1, dmem);

            // LN1 <- self-attention residual block
            Mat dr1 = ln_backward(dx1, lc.ln1, P.ln1_g, G.ln1_g, G.ln1_b);
            Mat dsa = dr1;
            if (!lc.self_drop.empty())
                dropout_backward(dsa, cfg.dropout, lc.self_drop);
            Mat dxin = dr1; // residual path
            AttnGrads sg{&G.self_attn.wq, &G.self_attn.bq, &G.self_attn.wk,
                         &G.self_attn.bk, &G.self_attn.wv, &G.self_attn.bv,
                         &G.self_attn.wo, &G.self_attn.bo};
            mha_backward(P.self_attn, lc.self_at, lc.x_in, lc.x_in, dsa, cfg.heads, sg, dxin,
                         dxin);
            dx = std::move(dxin);
        }

        // embeddings (positions are constant)
        for (int i = 0; i < dx.rows; ++i) {
            double* er = grads.embed.row(item.input[static_cast<size_t>(i)]);
            const double* dr = dx.row(i);
            for (int j = 0; j < cfg.d_model; ++j)
                er[j] += dr[j];
        }

        // feature projection
        addmul_ta(grads.proj_w, item.features, dmem);
        add_col_sums(grads.proj_b, dmem);
    }

    double loss = loss_sum * inv_total;
    if (!std::isfinite(loss))
        throw ValidationError("non-finite training loss");
    return loss;
}

void adamw_update(DecoderModel& model, DecoderModel& grads, AdamState& adam, double lr,
                  const TrainConfig& tc) {
    adam.t += 1;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, static_cast<double>(adam.t));
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, static_cast<double>(adam.t));
    auto ps = tensor_registry(model);
    auto gs = tensor_registry(grads);
    auto ms = tensor_registry(adam.m);
    auto vs = tensor_registry(adam.v);
    for (size_t k = 0; k < ps.size(); ++k) {
        Mat& p = *ps[k].mat;
        const Mat& g = *gs[k].mat;
        Mat& m = *ms[k].mat;
        Mat& v = *vs[k].mat;
        for (size_t i = 0; i < p.size(); ++i) {
            // decoupled weight decay, then the Adam step
            p.v[i] *= 1.0 - lr * tc.weight_decay;
            m.v[i] = tc.adam_beta1 * m.v[i] + (1.0 - tc.adam_beta1) * g.v[i];
            v.v[i] = tc.adam_beta2 * v.v[i] + (1.0 - tc.adam_beta2) * g.v[i] * g.v[i];
            double mhat = m.v[i] / bc1;
            double vhat = v.v[i] / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
        }
    }
}

double train_step(DecoderModel& model, const TrainBatch& batch, AdamState& adam,
                  const TrainConfig& tc, int epoch, std::mt19937_64& rng) {
    tc.validate();
    DecoderModel grads = DecoderModel::zeros(model.cfg);
    double loss = compute_gradients(model, batch, grads, true, &rng);
    adamw_update(model, grads, adam, lr_schedule(epoch, tc), tc);
    return loss;
}

std::vector<int> greedy_decode(const DecoderModel& model, const Mat& memory,
                               const std::vector<char>& mem_pad, int bos_id, int eos_id) {
    std::vector<int> seq{bos_id};
    while (static_cast<int>(seq.size()) < model.cfg.max_len) {
        Mat logits = decoder_forward(model, seq, memory, mem_pad, false, nullptr);
        const double* r = logits.row(logits.rows - 1);
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
            if (r[j] > r[best])
                best = j; // strict > keeps the smallest id on ties
        seq.push_back(best);
        if (best == eos_id)
            break;
    }
    return seq;
}

void save_checkpoint(const DecoderModel& model, const std::filesystem::path& path) {
    ByteWriter w;
    w.put_magic("WSDM");
    w.put_u16(1); // version
    const DecoderConfig& c = model.cfg;
    w.put_u32(static_cast<uint32_t>(c.layers));
    w.put_u32(static_cast<uint32_t>(c.heads));
    w.put_u32(static_cast<uint32_t>(c.d_model));
    w.put_u32(static_cast<uint32_t>(c.d_ff));
    w.put_u32(static_cast<uint32_t>(c.max_len));
    w.put_u32(static_cast<uint32_t>(c.vocab));
    w.put_u32(static_cast<uint32_t>(c.feat_dim));
    w.put_f32(static_cast<float>(c.dropout));
    auto& m = const_cast<DecoderModel&>(model);
    for (const TensorRef& t : tensor_registry(m))
        for (double v : t.mat->v)
            w.put_f32(static_cast<float>(v));
    w.finish_with_crc();
    w.write_file(path);
}

DecoderModel load_checkpoint(const std::filesystem::path& path) {
    ByteReader r = ByteReader::from_file(path);
    r.reserve_trailing_crc();
    r.expect_magic("WSDM", "checkpoint");
    uint16_t version = r.get_u16();
    if (version != 1)
        throw ValidationError("unsupported checkpoint version " + std::to_string(version) + ": " +
                              path.string());
    DecoderConfig c;
    c.layers = static_cast<int>(r.get_u32());
    c.heads = static_cast<int>(r.get_u32());
    c.d_model = static_cast<int>(r.get_u32());
    c.d_ff = static_cast<int>(r.get_u32());
    c.max_len = static_cast<int>(r.get_u32());
    c.vocab = static_cast<int>(r.get_u32());
    c.feat_dim = static_cast<int>(r.get_u32());
    c.dropout = static_cast<double>(r.get_f32());
    DecoderModel model = DecoderModel::zeros(c);
    for (const TensorRef& t : tensor_registry(model))
        for (double& v : t.mat->v)
            v = static_cast<double>(r.get_f32());
    if (r.remaining() != 0)
        throw ValidationError("checkpoint has trailing bytes: " + path.string());
    r.verify_crc("checkpoint");
    return model;
}

} // namespace wsireport
