#pragma once

#include "wsireport/features.hpp"
#include "wsireport/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace wsireport {

struct DecoderConfig {
    int layers = 6;
    int heads = 8;
    int d_model = 1024;
    int d_ff = 2048;
    double dropout = 0.1;
    int max_len = 64;
    int vocab = 42384;
    int feat_dim = 1024;

    int head_dim() const { return d_model / heads; }
    void validate() const;
};

struct AttentionParams {
    Mat wq, bq, wk, bk, wv, bv, wo, bo;
};

struct LayerParams {
    AttentionParams self_attn;
    AttentionParams cross_attn;
    Mat ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Mat ln1_g, ln1_b; // after self-attention
    Mat ln2_g, ln2_b; // after cross-attention
    Mat ln3_g, ln3_b; // after the feed-forward block
};

/// All learnable tensors plus the (fixed) sinusoidal position table.
/// Layer norm is post-norm: sublayer -> dropout -> residual add -> norm.
struct DecoderModel {
    DecoderConfig cfg;
    Mat proj_w, proj_b; // feature projection, feat_dim x d_model and 1 x d_model
    Mat embed;          // vocab x d_model
    std::vector<LayerParams> layers;
    Mat head_w, head_b; // d_model x vocab and 1 x vocab
    Mat pe;             // max_len x d_model, not learnable

    static DecoderModel zeros(const DecoderConfig& cfg);
};

enum class TensorKind { Weight, Bias, Gain };

struct TensorRef {
    Mat* mat;
    TensorKind kind;
    std::string name;
};

/// Every learnable tensor in the fixed serialization order. The same
/// order drives initialization draws, the optimizer loop and the
/// checkpoint layout.
std::vector<TensorRef> tensor_registry(DecoderModel& m);

struct TrainConfig {
    int warmup_epochs = 10;
    double warmup_lr = 5e-5;
    double base_lr = 5e-6;
    int batch = 64;
    int epochs = 350;
    uint64_t seed = 0;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

/// One training example: raw (unprojected) patch features with an
/// optional padding mask, plus teacher-forcing input/target ids of equal
/// length. PAD targets are excluded from the loss.
struct TrainItem {
    Mat features;              // n_mem x feat_dim
    std::vector<char> mem_pad; // n_mem entries; nonzero = padded row
    std::vector<int> input;    // BOS + tokens (+ PAD)
    std::vector<int> target;   // tokens + EOS (+ PAD)
};
using TrainBatch = std::vector<TrainItem>;

struct AdamState {
    DecoderModel m;
    DecoderModel v;
    int64_t t = 0;

    static AdamState zeros(const DecoderConfig& cfg);
};

/// M = F * W_p + b_p, rows aligned with F.
Mat project_features(const FeatureMatrix& f, const Mat& w_p, const Mat& b_p);
Mat project_features(const Mat& f, const Mat& w_p, const Mat& b_p);

/// Sinusoidal table: PE[pos][2i] = sin(pos/10000^(2i/d)),
/// PE[pos][2i+1] = cos(pos/10000^(2i/d)).
Mat positional_encoding(int max_len, int d_model);

/// Additive causal mask: 0 where query index >= key index, -inf elsewhere.
Mat causal_mask(int len);

/// softmax((Q K^T)/sqrt(d_k) + mask) V with row-wise max subtraction.
/// A row whose entries are all -inf is an error.
Mat attention(const Mat& q, const Mat& k, const Mat& v, const Mat& add_mask);

/// Full decoder stack over one sequence: token embedding + positions,
/// then per layer masked self-attention, cross-attention over `memory`
/// (rows flagged in mem_pad are invisible), and the feed-forward block.
/// Returns logits, one row per input position. `train` enables dropout
/// (rng required when dropout > 0).
Mat decoder_forward(const DecoderModel& model, const std::vector<int>& tokens,
                    const Mat& memory, const std::vector<char>& mem_pad, bool train,
                    std::mt19937_64* rng);

/// Mean loss over non-PAD target positions across the whole batch.
double cross_entropy_loss(const std::vector<Mat>& logits,
                          const std::vector<std::vector<int>>& targets, int pad_id);

/// Xavier-uniform init of every weight matrix from the seeded generator;
/// biases zero, layer-norm gains one.
void xavier_init(DecoderModel& model, uint64_t seed);

/// Warmup at warmup_lr, then linear decay reaching base_lr at the final
/// epoch.
double lr_schedule(int epoch, const TrainConfig& tc);

/// Forward + batch loss without touching parameters (dropout off).
/// Independent target of the finite-difference gradient oracle.
double batch_loss(const DecoderModel& model, const TrainBatch& batch);

/// Backpropagates the batch loss through every operation, accumulating
/// parameter gradients into `grads` (which must be zero-shaped like the
/// model). Returns the loss. Dropout fires only when train_dropout and
/// cfg.dropout > 0.
double compute_gradients(const DecoderModel& model, const TrainBatch& batch,
                         DecoderModel& grads, bool train_dropout = false,
                         std::mt19937_64* rng = nullptr);

/// One AdamW update at the given rate: decoupled decay p *= (1 - lr*wd)
/// on every parameter, then the bias-corrected Adam step.
void adamw_update(DecoderModel& model, DecoderModel& grads, AdamState& adam, double lr,
                  const TrainConfig& tc);

/// One AdamW step (decoupled weight decay applied to all parameters)
/// at lr_schedule(epoch). Returns the batch loss.
double train_step(DecoderModel& model, const TrainBatch& batch, AdamState& adam,
                  const TrainConfig& tc, int epoch, std::mt19937_64& rng);

/// Greedy autoregressive decode from BOS: repeatedly append the argmax
/// next token (smallest id wins ties) until EOS or max_len ids.
std::vector<int> greedy_decode(const DecoderModel& model, const Mat& memory,
                               const std::vector<char>& mem_pad, int bos_id, int eos_id);

/// Checkpoint I/O. Little-endian: magic "WSDM", u16 version = 1, config
/// as u32 fields (layers, heads, d_model, d_ff, max_len, vocab, feat_dim)
/// followed by f32 dropout, tensors as f32 in registry order, CRC32 of
/// all preceding bytes.
void save_checkpoint(const DecoderModel& model, const std::filesystem::path& path);
DecoderModel load_checkpoint(const std::filesystem::path& path);

} // namespace wsireport
