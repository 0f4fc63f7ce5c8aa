#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "kglm/common.hpp"
#include "kglm/corpus.hpp"

namespace kglm {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class ModelKind : uint8_t { Kglm, Kgbert, Star };
ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

struct ModelConfig {
    int32_t layers = 4;
    int32_t hidden_dim = 128;
    int32_t heads = 4;
    int32_t ffn_dim = 512;
    int32_t vocab_size = 0;
    int32_t er_table_size = 0;
    int32_t max_position = 64;
    double dropout = 0.1;
    // The full-scale reference geometry is 24 layers / 1024 hidden /
    // 16 heads; the defaults above are the desk-scale analog.

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Parameters. Token/position/ER-type embeddings are summed per Eq.-style
// input composition; the MLM projection is weight-tied to tok_emb.
// ---------------------------------------------------------------------------
template <class T>
struct EncoderLayer {
    Mat<T> wq, wk, wv, wo;
    Vec<T> bq, bk, bv, bo;
    Vec<T> ln1_g, ln1_b, ln2_g, ln2_b;
    Mat<T> w1, w2;
    Vec<T> b1, b2;
};

template <class T>
struct Model {
    ModelConfig cfg;
    ModelKind kind = ModelKind::Kglm;

    Mat<T> tok_emb;  // [V x d], doubles as the MLM output projection
    Mat<T> pos_emb;  // [max_position x d]
    Mat<T> er_emb;   // [er_table_size x d]
    Vec<T> emb_ln_g, emb_ln_b;
    std::vector<EncoderLayer<T>> layers;
    Vec<T> final_ln_g, final_ln_b;

    // MLM head: dense -> gelu -> layer-norm -> tied projection + bias
    Mat<T> mlm_w;
    Vec<T> mlm_b, mlm_ln_g, mlm_ln_b, mlm_out_b;

    // pooled sequence-classification head: first token -> dense -> tanh -> 2-way
    Mat<T> pool_w;
    Vec<T> pool_b;
    Mat<T> cls_w;  // [2 x d]
    Vec<T> cls_b;

    // pair classifier over [u; u*v; u-v; v] for the Siamese baseline
    Mat<T> star_w;  // [2 x 4d]
    Vec<T> star_b;

    void allocate(const ModelConfig& c);       // shapes only, zero-filled
    void init(const ModelConfig& c, Rng& rng); // truncated normal, std 0.02
    void zero();                               // reuse the struct as a gradient buffer
    void add_scaled(const Model<T>& other, T scale);  // this += scale * other
};

template <class T>
struct ParamRef {
    std::string name;
    T* data;
    int64_t size;
    bool decay;  // layer-norm and bias tensors are excluded from weight decay
};
template <class T>
std::vector<ParamRef<T>> param_refs(Model<T>& m);

// ---------------------------------------------------------------------------
// Ragged batch: sequences are concatenated row-wise, no padding required.
// rows marked real==0 are invisible to attention (pad slots).
// ---------------------------------------------------------------------------
struct PackedBatch {
    std::vector<int32_t> offsets{0};
    std::vector<int32_t> tok, pos, er;
    std::vector<uint8_t> real;
    std::vector<int32_t> mlm_target;  // original token id at masked rows, -1 elsewhere

    int32_t n_seqs() const { return static_cast<int32_t>(offsets.size()) - 1; }
    int32_t rows() const { return static_cast<int32_t>(tok.size()); }
    int32_t seq_len(int32_t s) const { return offsets[s + 1] - offsets[s]; }

    void add(const EncodedSequence& s);
    void add_masked(const EncodedSequence& masked_input, const std::vector<int32_t>& targets);
    void clear();
};

template <class T>
struct LayerCache {
    Mat<T> x_in, ln1_hat, ln1_out, q, k, v, ctx, x_mid, ln2_hat, ln2_out;
    Vec<T> ln1_rstd, ln2_rstd;
    std::vector<T> probs;          // per-seq, per-head attention rows
    std::vector<int64_t> probs_at; // offset of each sequence's block
    Mat<T> ffn_pre, ffn_act;
    std::vector<uint8_t> drop_att, drop_ffn;
};

template <class T>
struct Workspace {
    Mat<T> emb_sum, emb_hat, emb_out;
    Vec<T> emb_rstd;
    std::vector<uint8_t> drop_emb;
    std::vector<LayerCache<T>> layer;
    Mat<T> top_hat, hidden;  // final layer-norm cache and output
    Vec<T> top_rstd;
    Mat<T> d_hidden;         // gradient buffer w.r.t. hidden

    // head caches
    std::vector<int32_t> mlm_rows;
    Mat<T> mlm_in, mlm_pre, mlm_act, mlm_hat, mlm_ln_out, mlm_logits;
    Vec<T> mlm_rstd;
    Mat<T> pool_h0, pool_pre, pooled, cls_logits;
    std::vector<double> cls_prob;
};

// Encoder forward over a packed batch; fills ws and returns ws.hidden [N x d].
// training applies inverted dropout driven by rng.
template <class T>
const Mat<T>& encoder_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws,
                              bool training, Rng* rng);

// Backward from d(hidden) through the stack into grads (accumulated).
template <class T>
void encoder_backward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws, Model<T>& g);

// Mean cross-entropy over masked rows. Requires encoder_forward to have run on
// b in ws. empty==true (loss 0) when the batch has no masked rows.
struct MlmLoss {
    double loss = 0.0;
    int64_t masked = 0;
    bool empty = false;
};
template <class T>
MlmLoss mlm_head_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws);
// Seeds ws.d_hidden with the head gradient and accumulates head-param grads.
template <class T>
void mlm_head_backward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws, Model<T>& g);

// Pooled 2-way classification probability of the "true" class, one per sequence.
template <class T>
const std::vector<double>& cls_head_forward(const Model<T>& m, const PackedBatch& b,
                                            Workspace<T>& ws);
// d_prob: dLoss/dP(true) per sequence.
template <class T>
void cls_head_backward(const Model<T>& m, const PackedBatch& b,
                       const std::vector<double>& d_prob, Workspace<T>& ws, Model<T>& g);

// Pooled vectors (first token -> dense -> tanh), used by the Siamese baseline.
template <class T>
const Mat<T>& pool_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws);
template <class T>
void pool_backward(const Model<T>& m, const PackedBatch& b, const Mat<T>& d_pooled,
                   Workspace<T>& ws, Model<T>& g);

// ---------------------------------------------------------------------------
// Training losses built on the heads above
// ---------------------------------------------------------------------------

// Mean BCE of the alpha-weighted two-direction classification score. fwd/inv
// hold parallel encodings of the same examples; a side is skipped (and its
// batch may be empty) when alpha makes its weight zero.
template <class T>
double finetune_bce(const Model<T>& m, const PackedBatch& fwd, const PackedBatch& inv,
                    const std::vector<float>& labels, double alpha, Workspace<T>& ws_f,
                    Workspace<T>& ws_i, Model<T>* grads, bool training, Rng* rng,
                    std::vector<double>* out_scores = nullptr);

// Siamese pair objective: w * BCE(score_c, label) + (1-w) * mean hinge of
// max(0, margin - score_d(pos) + score_d(neg)) over (pos, neg) index pairs.
template <class T>
double star_pair_loss(const Model<T>& m, const PackedBatch& uparts, const PackedBatch& vparts,
                      const std::vector<float>& labels,
                      const std::vector<std::pair<int32_t, int32_t>>& hinge_pairs, double w,
                      double margin, Workspace<T>& ws_u, Workspace<T>& ws_v, Model<T>* grads,
                      bool training, Rng* rng, std::vector<double>* out_score_c = nullptr,
                      std::vector<double>* out_score_d = nullptr);

// Inference-side scores for the Siamese model: score_c (classifier
// probability) and score_d (negative pooled distance) per pair.
template <class T>
void star_forward_scores(const Model<T>& m, const PackedBatch& uparts, const PackedBatch& vparts,
                         Workspace<T>& ws_u, Workspace<T>& ws_v, std::vector<double>& score_c,
                         std::vector<double>& score_d);

// ---------------------------------------------------------------------------
// Single-sequence conveniences
// ---------------------------------------------------------------------------

// Token + position + ER-type embedding sum (no layer-norm).
template <class T>
Mat<T> embed_sum(const Model<T>& m, const EncodedSequence& seq);
// Same followed by the embedding layer-norm.
template <class T>
Mat<T> embed_input(const Model<T>& m, const EncodedSequence& seq);

// Deterministic (eval-mode) encoder over one sequence; real_mask may mark
// trailing pad slots, empty means all-real.
template <class T>
Mat<T> encode_forward(const Model<T>& m, const EncodedSequence& seq,
                      const std::vector<uint8_t>& real_mask = {});

template <class T>
MlmLoss mlm_loss(const Model<T>& m, const MaskedBatch& batch);

template <class T>
double seq_cls_score(const Model<T>& m, const EncodedSequence& seq);

// ---------------------------------------------------------------------------
// Finite-difference validation of the analytic gradients (double precision,
// dropout off). Checks every parameter tensor.
// ---------------------------------------------------------------------------
enum class GradCheckLoss : uint8_t { Mlm, Finetune, StarPair };

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_tensor;
    bool all_finite = true;
    std::string nonfinite_tensor;
    std::vector<std::pair<std::string, double>> per_tensor;
};

GradCheckReport grad_check(ModelConfig cfg, GradCheckLoss loss_kind, double epsilon,
                           uint64_t seed);

}  // namespace kglm
