#include "kglm/nn.hpp"

#include "kglm/nn_kernels.hpp"

#include <algorithm>
#include <cmath>

namespace kglm {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "kglm") return ModelKind::Kglm;
    if (s == "kgbert") return ModelKind::Kgbert;
    if (s == "star") return ModelKind::Star;
    throw ConfigError("unknown model kind: " + s + " (expected kglm|kgbert|star)");
}

std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Kglm: return "kglm";
        case ModelKind::Kgbert: return "kgbert";
        default: return "star";
    }
}

void ModelConfig::validate() const {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (hidden_dim < 1 || heads < 1 || hidden_dim % heads != 0)
        throw ConfigError("hidden_dim must be a positive multiple of heads");
    if (ffn_dim < 1) throw ConfigError("ffn_dim must be >= 1");
    if (vocab_size < Vocab::kNumSpecials) throw ConfigError("vocab_size too small");
    if (er_table_size < 1) throw ConfigError("er_table_size must be >= 1");
    if (max_position < 4) throw ConfigError("max_position must be >= 4");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// Model storage
// ---------------------------------------------------------------------------

template <class T>
void Model<T>::allocate(const ModelConfig& c) {
    c.validate();
    cfg = c;
    const int32_t d = c.hidden_dim;
    tok_emb.setZero(c.vocab_size, d);
    pos_emb.setZero(c.max_position, d);
    er_emb.setZero(c.er_table_size, d);
    emb_ln_g.setZero(d);
    emb_ln_b.setZero(d);
    layers.resize(c.layers);
    for (auto& l : layers) {
        l.wq.setZero(d, d);
        l.wk.setZero(d, d);
        l.wv.setZero(d, d);
        l.wo.setZero(d, d);
        l.bq.setZero(d);
        l.bk.setZero(d);
        l.bv.setZero(d);
        l.bo.setZero(d);
        l.ln1_g.setZero(d);
        l.ln1_b.setZero(d);
        l.ln2_g.setZero(d);
        l.ln2_b.setZero(d);
        l.w1.setZero(c.ffn_dim, d);
        l.b1.setZero(c.ffn_dim);
        l.w2.setZero(d, c.ffn_dim);
        l.b2.setZero(d);
    }
    final_ln_g.setZero(d);
    final_ln_b.setZero(d);
    mlm_w.setZero(d, d);
    mlm_b.setZero(d);
    mlm_ln_g.setZero(d);
    mlm_ln_b.setZero(d);
    mlm_out_b.setZero(c.vocab_size);
    pool_w.setZero(d, d);
    pool_b.setZero(d);
    cls_w.setZero(2, d);
    cls_b.setZero(2);
    star_w.setZero(2, 4 * d);
    star_b.setZero(2);
}

template <class T>
void Model<T>::init(const ModelConfig& c, Rng& rng) {
    allocate(c);
    constexpr double kStd = 0.02;
    for (auto& p : param_refs(*this)) {
        bool is_ln_gain = p.name.find("ln_g") != std::string::npos;
        if (is_ln_gain) {
            for (int64_t i = 0; i < p.size; ++i) p.data[i] = T(1);
        } else if (p.decay) {  // weight matrices and embeddings
            for (int64_t i = 0; i < p.size; ++i) p.data[i] = T(rng.trunc_normal(kStd));
        }  // biases and LN shifts stay zero
    }
}

template <class T>
void Model<T>::zero() {
    for (auto& p : param_refs(*this))
        std::fill(p.data, p.data + p.size, T(0));
}

template <class T>
void Model<T>::add_scaled(const Model<T>& other, T scale) {
    auto a = param_refs(*this);
    auto b = param_refs(const_cast<Model<T>&>(other));
    for (size_t i = 0; i < a.size(); ++i)
        for (int64_t j = 0; j < a[i].size; ++j) a[i].data[j] += scale * b[i].data[j];
}

template <class T>
std::vector<ParamRef<T>> param_refs(Model<T>& m) {
    std::vector<ParamRef<T>> out;
    auto mat = [&](const std::string& name, Mat<T>& x) {
        out.push_back({name, x.data(), x.size(), true});
    };
    auto vec = [&](const std::string& name, Vec<T>& x) {
        out.push_back({name, x.data(), x.size(), false});
    };
    mat("tok_emb", m.tok_emb);
    mat("pos_emb", m.pos_emb);
    mat("er_emb", m.er_emb);
    vec("emb_ln_g", m.emb_ln_g);
    vec("emb_ln_b", m.emb_ln_b);
    for (size_t i = 0; i < m.layers.size(); ++i) {
        auto& l = m.layers[i];
        std::string p = "layer" + std::to_string(i) + ".";
        mat(p + "wq", l.wq);
        vec(p + "bq", l.bq);
        mat(p + "wk", l.wk);
        vec(p + "bk", l.bk);
        mat(p + "wv", l.wv);
        vec(p + "bv", l.bv);
        mat(p + "wo", l.wo);
        vec(p + "bo", l.bo);
        vec(p + "ln1_g", l.ln1_g);
        vec(p + "ln1_b", l.ln1_b);
        vec(p + "ln2_g", l.ln2_g);
        vec(p + "ln2_b", l.ln2_b);
        mat(p + "w1", l.w1);
        vec(p + "b1", l.b1);
        mat(p + "w2", l.w2);
        vec(p + "b2", l.b2);
    }
    vec("final_ln_g", m.final_ln_g);
    vec("final_ln_b", m.final_ln_b);
    mat("mlm_w", m.mlm_w);
    vec("mlm_b", m.mlm_b);
    vec("mlm_ln_g", m.mlm_ln_g);
    vec("mlm_ln_b", m.mlm_ln_b);
    vec("mlm_out_b", m.mlm_out_b);
    mat("pool_w", m.pool_w);
    vec("pool_b", m.pool_b);
    mat("cls_w", m.cls_w);
    vec("cls_b", m.cls_b);
    mat("star_w", m.star_w);
    vec("star_b", m.star_b);
    return out;
}

// ---------------------------------------------------------------------------
// PackedBatch
// ---------------------------------------------------------------------------

void PackedBatch::add(const EncodedSequence& s) {
    tok.insert(tok.end(), s.token_ids.begin(), s.token_ids.end());
    pos.insert(pos.end(), s.position_ids.begin(), s.position_ids.end());
    er.insert(er.end(), s.er_type_ids.begin(), s.er_type_ids.end());
    for (int32_t t : s.token_ids) real.push_back(t != Vocab::kPad);
    mlm_target.insert(mlm_target.end(), s.token_ids.size(), -1);
    offsets.push_back(rows());
}

void PackedBatch::add_masked(const EncodedSequence& masked_input,
                             const std::vector<int32_t>& targets) {
    size_t base = tok.size();
    add(masked_input);
    std::copy(targets.begin(), targets.end(), mlm_target.begin() + base);
}

void PackedBatch::clear() {
    offsets.assign(1, 0);
    tok.clear();
    pos.clear();
    er.clear();
    real.clear();
    mlm_target.clear();
}

// ---------------------------------------------------------------------------
// Encoder forward
// ---------------------------------------------------------------------------

template <class T>
const Mat<T>& encoder_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws,
                              bool training, Rng* rng) {
    const int32_t n = b.rows();
    const int32_t d = m.cfg.hidden_dim;
    const int32_t heads = m.cfg.heads;
    const int32_t dh = d / heads;
    const T att_scale = T(1) / std::sqrt(T(dh));

    for (int32_t s = 0; s < b.n_seqs(); ++s)
        if (b.seq_len(s) > m.cfg.max_position)
            throw ConfigError("sequence length " + std::to_string(b.seq_len(s)) +
                              " exceeds max_position " + std::to_string(m.cfg.max_position));
    for (int32_t i = 0; i < n; ++i) {
        if (b.tok[i] < 0 || b.tok[i] >= m.cfg.vocab_size || b.pos[i] < 0 ||
            b.pos[i] >= m.cfg.max_position || b.er[i] < 0 || b.er[i] >= m.cfg.er_table_size)
            throw std::out_of_range("embedding id out of bounds at row " + std::to_string(i));
    }

    ws.emb_sum.resize(n, d);
    for (int32_t i = 0; i < n; ++i)
        ws.emb_sum.row(i) = m.tok_emb.row(b.tok[i]) + m.pos_emb.row(b.pos[i]) +
                            m.er_emb.row(b.er[i]);
    kernels::layernorm_forward(ws.emb_sum, m.emb_ln_g, m.emb_ln_b, ws.emb_hat, ws.emb_rstd, ws.emb_out);
    kernels::apply_dropout(ws.emb_out, ws.drop_emb, m.cfg.dropout, training, rng);

    ws.layer.resize(m.layers.size());
    const Mat<T>* x = &ws.emb_out;
    for (size_t li = 0; li < m.layers.size(); ++li) {
        const auto& L = m.layers[li];
        auto& c = ws.layer[li];
        c.x_in = *x;

        kernels::layernorm_forward(c.x_in, L.ln1_g, L.ln1_b, c.ln1_hat, c.ln1_rstd, c.ln1_out);
        kernels::linear_forward(c.ln1_out, L.wq, L.bq, c.q);
        kernels::linear_forward(c.ln1_out, L.wk, L.bk, c.k);
        kernels::linear_forward(c.ln1_out, L.wv, L.bv, c.v);

        c.ctx.resize(n, d);
        c.probs_at.assign(b.n_seqs(), 0);
        int64_t total = 0;
        for (int32_t s = 0; s < b.n_seqs(); ++s) {
            c.probs_at[s] = total;
            int64_t len = b.seq_len(s);
            total += int64_t(heads) * len * len;
        }
        c.probs.resize(total);

        for (int32_t s = 0; s < b.n_seqs(); ++s) {
            const int32_t o = b.offsets[s];
            const int32_t len = b.seq_len(s);
            for (int32_t h = 0; h < heads; ++h) {
                Eigen::Map<Mat<T>> P(c.probs.data() + c.probs_at[s] + int64_t(h) * len * len,
                                     len, len);
                auto qh = c.q.block(o, h * dh, len, dh);
                auto kh = c.k.block(o, h * dh, len, dh);
                auto vh = c.v.block(o, h * dh, len, dh);
                P.noalias() = qh * kh.transpose() * att_scale;
                for (int32_t j = 0; j < len; ++j)
                    if (!b.real[o + j]) P.col(j).setConstant(T(-1e30));
                for (Eigen::Index i = 0; i < len; ++i) {
                    T mx = P.row(i).maxCoeff();
                    P.row(i) = (P.row(i).array() - mx).exp();
                    P.row(i) /= P.row(i).sum();
                }
                c.ctx.block(o, h * dh, len, dh).noalias() = P * vh;
            }
        }

        Mat<T> att;
        kernels::linear_forward(c.ctx, L.wo, L.bo, att);
        kernels::apply_dropout(att, c.drop_att, m.cfg.dropout, training, rng);
        c.x_mid = c.x_in + att;

        kernels::layernorm_forward(c.x_mid, L.ln2_g, L.ln2_b, c.ln2_hat, c.ln2_rstd, c.ln2_out);
        kernels::linear_forward(c.ln2_out, L.w1, L.b1, c.ffn_pre);
        c.ffn_act = c.ffn_pre.unaryExpr([](T v) { return kernels::gelu(v); });
        Mat<T> ffn_out;
        kernels::linear_forward(c.ffn_act, L.w2, L.b2, ffn_out);
        kernels::apply_dropout(ffn_out, c.drop_ffn, m.cfg.dropout, training, rng);
        c.x_mid += ffn_out;  // c.x_mid now holds the layer output
        x = &c.x_mid;
    }

    kernels::layernorm_forward(*x, m.final_ln_g, m.final_ln_b, ws.top_hat, ws.top_rstd, ws.hidden);
    return ws.hidden;
}

// NOTE: x_mid is reused as the layer output above; backward recovers the
// residual split from the cached branch inputs.

template <class T>
void encoder_backward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws, Model<T>& g) {
    const int32_t n = b.rows();
    const int32_t d = m.cfg.hidden_dim;
    const int32_t heads = m.cfg.heads;
    const int32_t dh = d / heads;
    const T att_scale = T(1) / std::sqrt(T(dh));

    Mat<T> dx;
    kernels::layernorm_backward(ws.d_hidden, ws.top_hat, ws.top_rstd, m.final_ln_g, dx, g.final_ln_g,
                       g.final_ln_b);

    for (int64_t li = int64_t(m.layers.size()) - 1; li >= 0; --li) {
        const auto& L = m.layers[li];
        auto& c = ws.layer[li];
        auto& gl = g.layers[li];

        // ffn branch
        Mat<T> dffn_out = dx;
        kernels::dropout_backward(dffn_out, c.drop_ffn, m.cfg.dropout);
        Mat<T> dact;
        kernels::linear_backward(dffn_out, c.ffn_act, L.w2, gl.w2, gl.b2, &dact);
        Mat<T> dpre = (dact.array() * c.ffn_pre.unaryExpr([](T v) { return kernels::gelu_grad(v); }).array()).matrix();
        Mat<T> dln2;
        kernels::linear_backward(dpre, c.ln2_out, L.w1, gl.w1, gl.b1, &dln2);
        Mat<T> dxmid;
        kernels::layernorm_backward(dln2, c.ln2_hat, c.ln2_rstd, L.ln2_g, dxmid, gl.ln2_g, gl.ln2_b);
        dxmid += dx;  // residual

        // attention branch
        Mat<T> datt = dxmid;
        kernels::dropout_backward(datt, c.drop_att, m.cfg.dropout);
        Mat<T> dctx;
        kernels::linear_backward(datt, c.ctx, L.wo, gl.wo, gl.bo, &dctx);

        Mat<T> dq = Mat<T>::Zero(n, d), dk = Mat<T>::Zero(n, d), dv = Mat<T>::Zero(n, d);
        for (int32_t s = 0; s < b.n_seqs(); ++s) {
            const int32_t o = b.offsets[s];
            const int32_t len = b.seq_len(s);
            for (int32_t h = 0; h < heads; ++h) {
                Eigen::Map<Mat<T>> P(c.probs.data() + c.probs_at[s] + int64_t(h) * len * len,
                                     len, len);
                auto qh = c.q.block(o, h * dh, len, dh);
                auto kh = c.k.block(o, h * dh, len, dh);
                auto vh = c.v.block(o, h * dh, len, dh);
                auto dctx_h = dctx.block(o, h * dh, len, dh);

                Mat<T> dP = dctx_h * vh.transpose();
                dv.block(o, h * dh, len, dh).noalias() = P.transpose() * dctx_h;
                // softmax backward: dS = P .* (dP - rowsum(dP .* P))
                Mat<T> dS(len, len);
                for (Eigen::Index i = 0; i < len; ++i) {
                    T dot = (dP.row(i).array() * P.row(i).array()).sum();
                    dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
                }
                dq.block(o, h * dh, len, dh).noalias() = dS * kh * att_scale;
                dk.block(o, h * dh, len, dh).noalias() = dS.transpose() * qh * att_scale;
            }
        }

        Mat<T> dln1(n, d);
        kernels::linear_backward(dq, c.ln1_out, L.wq, gl.wq, gl.bq, &dln1);
        Mat<T> tmp;
        kernels::linear_backward(dk, c.ln1_out, L.wk, gl.wk, gl.bk, &tmp);
        dln1 += tmp;
        kernels::linear_backward(dv, c.ln1_out, L.wv, gl.wv, gl.bv, &tmp);
        dln1 += tmp;

        Mat<T> dx_in;
        kernels::layernorm_backward(dln1, c.ln1_hat, c.ln1_rstd, L.ln1_g, dx_in, gl.ln1_g, gl.ln1_b);
        dx = dxmid + dx_in;
    }

    kernels::dropout_backward(dx, ws.drop_emb, m.cfg.dropout);
    Mat<T> demb;
    kernels::layernorm_backward(dx, ws.emb_hat, ws.emb_rstd, m.emb_ln_g, demb, g.emb_ln_g, g.emb_ln_b);
    for (int32_t i = 0; i < n; ++i) {
        g.tok_emb.row(b.tok[i]) += demb.row(i);
        g.pos_emb.row(b.pos[i]) += demb.row(i);
        g.er_emb.row(b.er[i]) += demb.row(i);
    }
}

// ---------------------------------------------------------------------------
// MLM head
// ---------------------------------------------------------------------------

template <class T>
MlmLoss mlm_head_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws) {
    ws.mlm_rows.clear();
    for (int32_t i = 0; i < b.rows(); ++i)
        if (b.mlm_target[i] >= 0) ws.mlm_rows.push_back(i);
    MlmLoss out;
    out.masked = static_cast<int64_t>(ws.mlm_rows.size());
    if (ws.mlm_rows.empty()) {
        out.empty = true;
        return out;
    }
    const int32_t mrows = static_cast<int32_t>(ws.mlm_rows.size());
    const int32_t d = m.cfg.hidden_dim;

    ws.mlm_in.resize(mrows, d);
    for (int32_t i = 0; i < mrows; ++i) ws.mlm_in.row(i) = ws.hidden.row(ws.mlm_rows[i]);
    kernels::linear_forward(ws.mlm_in, m.mlm_w, m.mlm_b, ws.mlm_pre);
    ws.mlm_act = ws.mlm_pre.unaryExpr([](T v) { return kernels::gelu(v); });
    kernels::layernorm_forward(ws.mlm_act, m.mlm_ln_g, m.mlm_ln_b, ws.mlm_hat, ws.mlm_rstd, ws.mlm_ln_out);
    ws.mlm_logits.noalias() = ws.mlm_ln_out * m.tok_emb.transpose();
    ws.mlm_logits.rowwise() += m.mlm_out_b.transpose();

    double loss = 0.0;
    for (int32_t i = 0; i < mrows; ++i) {
        int32_t target = b.mlm_target[ws.mlm_rows[i]];
        T mx = ws.mlm_logits.row(i).maxCoeff();
        double lse = std::log(double((ws.mlm_logits.row(i).array() - mx).exp().sum())) + double(mx);
        loss += lse - double(ws.mlm_logits(i, target));
    }
    out.loss = loss / double(mrows);
    return out;
}

template <class T>
void mlm_head_backward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws, Model<T>& g) {
    const int32_t mrows = static_cast<int32_t>(ws.mlm_rows.size());
    const int32_t d = m.cfg.hidden_dim;
    ws.d_hidden.setZero(b.rows(), d);
    if (mrows == 0) return;

    // softmax in place of the cached logits
    for (Eigen::Index i = 0; i < mrows; ++i) {
        T mx = ws.mlm_logits.row(i).maxCoeff();
        ws.mlm_logits.row(i) = (ws.mlm_logits.row(i).array() - mx).exp();
        ws.mlm_logits.row(i) /= ws.mlm_logits.row(i).sum();
    }
    const T inv = T(1) / T(mrows);
    for (int32_t i = 0; i < mrows; ++i)
        ws.mlm_logits(i, b.mlm_target[ws.mlm_rows[i]]) -= T(1);
    ws.mlm_logits *= inv;  // now dlogits

    Mat<T> dln_out = ws.mlm_logits * m.tok_emb;
    g.tok_emb.noalias() += ws.mlm_logits.transpose() * ws.mlm_ln_out;  // tied projection
    g.mlm_out_b.noalias() += ws.mlm_logits.colwise().sum().transpose();

    Mat<T> dact;
    kernels::layernorm_backward(dln_out, ws.mlm_hat, ws.mlm_rstd, m.mlm_ln_g, dact, g.mlm_ln_g,
                       g.mlm_ln_b);
    Mat<T> dpre = (dact.array() * ws.mlm_pre.unaryExpr([](T v) { return kernels::gelu_grad(v); }).array()).matrix();
    Mat<T> din;
    kernels::linear_backward(dpre, ws.mlm_in, m.mlm_w, g.mlm_w, g.mlm_b, &din);
    for (int32_t i = 0; i < mrows; ++i) ws.d_hidden.row(ws.mlm_rows[i]) += din.row(i);
}

// ---------------------------------------------------------------------------
// Pooling and sequence classification
// ---------------------------------------------------------------------------

template <class T>
const Mat<T>& pool_forward(const Model<T>& m, const PackedBatch& b, Workspace<T>& ws) {
    const int32_t s = b.n_seqs();
    const int32_t d = m.cfg.hidden_dim;
    ws.pool_h0.resize(s, d);
    for (int32_t i = 0; i < s; ++i) ws.pool_h0.row(i) = ws.hidden.row(b.offsets[i]);
    kernels::linear_forward(ws.pool_h0, m.pool_w, m.pool_b, ws.pool_pre);
    ws.pooled = ws.pool_pre.array().tanh().matrix();
    return ws.pooled;
}

template <class T>
void pool_backward(const Model<T>& m, const PackedBatch& b, const Mat<T>& d_pooled,
                   Workspace<T>& ws, Model<T>& g) {
    Mat<T> dpre = (d_pooled.array() * (T(1) - ws.pooled.array().square())).matrix();
    Mat<T> dh0;
    kernels::linear_backward(dpre, ws.pool_h0, m.pool_w, g.pool_w, g.pool_b, &dh0);
    for (int32_t i = 0; i < b.n_seqs(); ++i) ws.d_hidden.row(b.offsets[i]) += dh0.row(i);
}

template <class T>
const std::vector<double>& cls_head_forward(const Model<T>& m, const PackedBatch& b,
                                            Workspace<T>& ws) {
    pool_forward(m, b, ws);
    kernels::linear_forward(ws.pooled, m.cls_w, m.cls_b, ws.cls_logits);
    ws.cls_prob.resize(b.n_seqs());
    for (int32_t i = 0; i < b.n_seqs(); ++i) {
        double z = double(ws.cls_logits(i, 1)) - double(ws.cls_logits(i, 0));
        ws.cls_prob[i] = 1.0 / (1.0 + std::exp(-z));
    }
    return ws.cls_prob;
}

template <class T>
void cls_head_backward(const Model<T>& m, const PackedBatch& b,
                       const std::vector<double>& d_prob, Workspace<T>& ws, Model<T>& g) {
    const int32_t s = b.n_seqs();
    ws.d_hidden.setZero(b.rows(), m.cfg.hidden_dim);
    Mat<T> dz(s, 2);
    for (int32_t i = 0; i < s; ++i) {
        double p = ws.cls_prob[i];
        double d1 = d_prob[i] * p * (1.0 - p);
        dz(i, 1) = T(d1);
        dz(i, 0) = T(-d1);
    }
    Mat<T> dpooled;
    kernels::linear_backward(dz, ws.pooled, m.cls_w, g.cls_w, g.cls_b, &dpooled);
    pool_backward(m, b, dpooled, ws, g);
}

// ---------------------------------------------------------------------------
// Single-sequence conveniences
// ---------------------------------------------------------------------------

template <class T>
Mat<T> embed_sum(const Model<T>& m, const EncodedSequence& seq) {
    const int32_t L = seq.length();
    Mat<T> x(L, m.cfg.hidden_dim);
    for (int32_t i = 0; i < L; ++i) {
        if (seq.token_ids[i] < 0 || seq.token_ids[i] >= m.cfg.vocab_size ||
            seq.er_type_ids[i] < 0 || seq.er_type_ids[i] >= m.cfg.er_table_size ||
            seq.position_ids[i] < 0 || seq.position_ids[i] >= m.cfg.max_position)
            throw std::out_of_range("embedding id out of bounds at position " +
                                    std::to_string(i));
        x.row(i) = m.tok_emb.row(seq.token_ids[i]) + m.pos_emb.row(seq.position_ids[i]) +
                   m.er_emb.row(seq.er_type_ids[i]);
    }
    return x;
}

template <class T>
Mat<T> embed_input(const Model<T>& m, const EncodedSequence& seq) {
    Mat<T> x = embed_sum(m, seq);
    Mat<T> hat, y;
    Vec<T> rstd;
    kernels::layernorm_forward(x, m.emb_ln_g, m.emb_ln_b, hat, rstd, y);
    return y;
}

template <class T>
Mat<T> encode_forward(const Model<T>& m, const EncodedSequence& seq,
                      const std::vector<uint8_t>& real_mask) {
    PackedBatch b;
    b.add(seq);
    if (!real_mask.empty()) {
        if (real_mask.size() != size_t(seq.length()))
            throw ConfigError("pad mask length mismatch");
        std::copy(real_mask.begin(), real_mask.end(), b.real.begin());
    }
    Workspace<T> ws;
    encoder_forward(m, b, ws, false, nullptr);
    return ws.hidden;
}

template <class T>
MlmLoss mlm_loss(const Model<T>& m, const MaskedBatch& batch) {
    PackedBatch b;
    for (size_t i = 0; i < batch.input.size(); ++i)
        b.add_masked(batch.input[i], batch.targets[i]);
    Workspace<T> ws;
    encoder_forward(m, b, ws, false, nullptr);
    return mlm_head_forward(m, b, ws);
}

template <class T>
double seq_cls_score(const Model<T>& m, const EncodedSequence& seq) {
    if (seq.token_ids.empty() || seq.token_ids[0] != Vocab::kBos)
        throw ConfigError("sequence must begin with [s]");
    PackedBatch b;
    b.add(seq);
    Workspace<T> ws;
    encoder_forward(m, b, ws, false, nullptr);
    return cls_head_forward(m, b, ws)[0];
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define KGLM_INSTANTIATE(T)                                                                   \
    template struct Model<T>;                                                                 \
    template std::vector<ParamRef<T>> param_refs(Model<T>&);                                  \
    template const Mat<T>& encoder_forward(const Model<T>&, const PackedBatch&, Workspace<T>&,\
                                           bool, Rng*);                                       \
    template void encoder_backward(const Model<T>&, const PackedBatch&, Workspace<T>&,        \
                                   Model<T>&);                                                \
    template MlmLoss mlm_head_forward(const Model<T>&, const PackedBatch&, Workspace<T>&);    \
    template void mlm_head_backward(const Model<T>&, const PackedBatch&, Workspace<T>&,       \
                                    Model<T>&);                                               \
    template const Mat<T>& pool_forward(const Model<T>&, const PackedBatch&, Workspace<T>&);  \
    template void pool_backward(const Model<T>&, const PackedBatch&, const Mat<T>&,           \
                                Workspace<T>&, Model<T>&);                                    \
    template const std::vector<double>& cls_head_forward(const Model<T>&, const PackedBatch&, \
                                                         Workspace<T>&);                      \
    template void cls_head_backward(const Model<T>&, const PackedBatch&,                      \
                                    const std::vector<double>&, Workspace<T>&, Model<T>&);    \
    template Mat<T> embed_sum(const Model<T>&, const EncodedSequence&);                       \
    template Mat<T> embed_input(const Model<T>&, const EncodedSequence&);                     \
    template Mat<T> encode_forward(const Model<T>&, const EncodedSequence&,                   \
                                   const std::vector<uint8_t>&);                              \
    template MlmLoss mlm_loss(const Model<T>&, const MaskedBatch&);                           \
    template double seq_cls_score(const Model<T>&, const EncodedSequence&);

KGLM_INSTANTIATE(float)
KGLM_INSTANTIATE(double)

}  // namespace kglm
