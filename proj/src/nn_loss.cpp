#include <algorithm>
#include <cmath>

#include "kglm/nn.hpp"
#include "kglm/nn_kernels.hpp"

namespace kglm {

namespace {
constexpr double kProbFloor = 1e-12;

double bce(double p, double y) {
    double s = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    return -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
}
}  // namespace

template <class T>
double finetune_bce(const Model<T>& m, const PackedBatch& fwd, const PackedBatch& inv,
                    const std::vector<float>& labels, double alpha, Workspace<T>& ws_f,
                    Workspace<T>& ws_i, Model<T>* grads, bool training, Rng* rng,
                    std::vector<double>* out_scores) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
    const bool use_f = alpha > 0.0;
    const bool use_i = alpha < 1.0;
    const int32_t batch = static_cast<int32_t>(labels.size());

    const std::vector<double>* pf = nullptr;
    const std::vector<double>* pi = nullptr;
    if (use_f) {
        encoder_forward(m, fwd, ws_f, training, rng);
        pf = &cls_head_forward(m, fwd, ws_f);
    }
    if (use_i) {
        encoder_forward(m, inv, ws_i, training, rng);
        pi = &cls_head_forward(m, inv, ws_i);
    }

    if (out_scores) out_scores->assign(batch, 0.0);
    std::vector<double> df(batch, 0.0), di(batch, 0.0);
    double loss = 0.0;
    for (int32_t e = 0; e < batch; ++e) {
        double s = (use_f ? alpha * (*pf)[e] : 0.0) + (use_i ? (1.0 - alpha) * (*pi)[e] : 0.0);
        double y = labels[e];
        loss += bce(s, y);
        if (out_scores) (*out_scores)[e] = s;
        if (grads) {
            double sc = std::clamp(s, kProbFloor, 1.0 - kProbFloor);
            double ds = (sc - y) / std::max(sc * (1.0 - sc), kProbFloor) / double(batch);
            df[e] = alpha * ds;
            di[e] = (1.0 - alpha) * ds;
        }
    }
    loss /= double(batch);

    if (grads) {
        if (use_f) {
            cls_head_backward(m, fwd, df, ws_f, *grads);
            encoder_backward(m, fwd, ws_f, *grads);
        }
        if (use_i) {
            cls_head_backward(m, inv, di, ws_i, *grads);
            encoder_backward(m, inv, ws_i, *grads);
        }
    }
    return loss;
}

namespace {

// features per pair: [u; u.*v; u-v; v]
template <class T>
void star_features(const Mat<T>& u, const Mat<T>& v, Mat<T>& f) {
    const auto b = u.rows();
    const auto d = u.cols();
    f.resize(b, 4 * d);
    f.leftCols(d) = u;
    f.middleCols(d, d) = u.cwiseProduct(v);
    f.middleCols(2 * d, d) = u - v;
    f.rightCols(d) = v;
}

}  // namespace

template <class T>
void star_forward_scores(const Model<T>& m, const PackedBatch& uparts, const PackedBatch& vparts,
                         Workspace<T>& ws_u, Workspace<T>& ws_v, std::vector<double>& score_c,
                         std::vector<double>& score_d) {
    encoder_forward(m, uparts, ws_u, false, nullptr);
    encoder_forward(m, vparts, ws_v, false, nullptr);
    const Mat<T>& u = pool_forward(m, uparts, ws_u);
    const Mat<T>& v = pool_forward(m, vparts, ws_v);
    Mat<T> f, z;
    star_features(u, v, f);
    kernels::linear_forward(f, m.star_w, m.star_b, z);
    const auto b = u.rows();
    score_c.resize(b);
    score_d.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        score_c[i] = 1.0 / (1.0 + std::exp(double(z(i, 0)) - double(z(i, 1))));
        score_d[i] = -double((u.row(i) - v.row(i)).norm());
    }
}

template <class T>
double star_pair_loss(const Model<T>& m, const PackedBatch& uparts, const PackedBatch& vparts,
                      const std::vector<float>& labels,
                      const std::vector<std::pair<int32_t, int32_t>>& hinge_pairs, double w,
                      double margin, Workspace<T>& ws_u, Workspace<T>& ws_v, Model<T>* grads,
                      bool training, Rng* rng, std::vector<double>* out_score_c,
                      std::vector<double>* out_score_d) {
    if (w < 0.0 || w > 1.0) throw ConfigError("star loss weight must be in [0, 1]");
    const int32_t batch = static_cast<int32_t>(labels.size());

    encoder_forward(m, uparts, ws_u, training, rng);
    encoder_forward(m, vparts, ws_v, training, rng);
    const Mat<T>& u = pool_forward(m, uparts, ws_u);
    const Mat<T>& v = pool_forward(m, vparts, ws_v);
    const int32_t d = m.cfg.hidden_dim;

    Mat<T> f, z;
    star_features(u, v, f);
    kernels::linear_forward(f, m.star_w, m.star_b, z);

    std::vector<double> prob(batch), dist(batch);
    for (int32_t i = 0; i < batch; ++i) {
        prob[i] = 1.0 / (1.0 + std::exp(double(z(i, 0)) - double(z(i, 1))));
        dist[i] = -double((u.row(i) - v.row(i)).norm());
    }
    if (out_score_c) *out_score_c = prob;
    if (out_score_d) *out_score_d = dist;

    double bce_term = 0.0;
    for (int32_t i = 0; i < batch; ++i) bce_term += bce(prob[i], labels[i]);
    bce_term /= double(batch);

    double hinge_term = 0.0;
    for (auto [ip, in] : hinge_pairs)
        hinge_term += std::max(0.0, margin - dist[ip] + dist[in]);
    if (!hinge_pairs.empty()) hinge_term /= double(hinge_pairs.size());

    double loss = w * bce_term + (1.0 - w) * hinge_term;
    if (!grads) return loss;

    // classifier branch; dL/dz1 of BCE-through-sigmoid is (p - y)
    Mat<T> dz(batch, 2);
    for (int32_t i = 0; i < batch; ++i) {
        double d1 = w * (prob[i] - labels[i]) / double(batch);
        dz(i, 1) = T(d1);
        dz(i, 0) = T(-d1);
    }
    Mat<T> dfeat;
    kernels::linear_backward(dz, f, m.star_w, grads->star_w, grads->star_b, &dfeat);

    Mat<T> du(batch, d), dv(batch, d);
    for (int32_t i = 0; i < batch; ++i) {
        auto a = dfeat.row(i).segment(0, d);
        auto b2 = dfeat.row(i).segment(d, d);
        auto c = dfeat.row(i).segment(2 * d, d);
        auto e = dfeat.row(i).segment(3 * d, d);
        du.row(i) = a + b2.cwiseProduct(v.row(i)) + c;
        dv.row(i) = b2.cwiseProduct(u.row(i)) - c + e;
    }

    // distance branch through active hinge pairs
    if (!hinge_pairs.empty()) {
        const double coef = (1.0 - w) / double(hinge_pairs.size());
        for (auto [ip, in] : hinge_pairs) {
            if (margin - dist[ip] + dist[in] <= 0.0) continue;
            double np = -dist[ip], nn = -dist[in];
            if (np > 0.0) {
                auto diff = (u.row(ip) - v.row(ip)).eval();
                du.row(ip) += (T(coef / np) * diff.array()).matrix();
                dv.row(ip) -= (T(coef / np) * diff.array()).matrix();
            }
            if (nn > 0.0) {
                auto diff = (u.row(in) - v.row(in)).eval();
                du.row(in) -= (T(coef / nn) * diff.array()).matrix();
                dv.row(in) += (T(coef / nn) * diff.array()).matrix();
            }
        }
    }

    ws_u.d_hidden.setZero(uparts.rows(), d);
    ws_v.d_hidden.setZero(vparts.rows(), d);
    pool_backward(m, uparts, du, ws_u, *grads);
    pool_backward(m, vparts, dv, ws_v, *grads);
    encoder_backward(m, uparts, ws_u, *grads);
    encoder_backward(m, vparts, ws_v, *grads);
    return loss;
}

#define KGLM_INSTANTIATE_LOSS(T)                                                               \
    template double finetune_bce(const Model<T>&, const PackedBatch&, const PackedBatch&,      \
                                 const std::vector<float>&, double, Workspace<T>&,             \
                                 Workspace<T>&, Model<T>*, bool, Rng*, std::vector<double>*);  \
    template void star_forward_scores(const Model<T>&, const PackedBatch&, const PackedBatch&, \
                                      Workspace<T>&, Workspace<T>&, std::vector<double>&,      \
                                      std::vector<double>&);                                   \
    template double star_pair_loss(const Model<T>&, const PackedBatch&, const PackedBatch&,    \
                                   const std::vector<float>&,                                  \
                                   const std::vector<std::pair<int32_t, int32_t>>&, double,    \
                                   double, Workspace<T>&, Workspace<T>&, Model<T>*, bool,      \
                                   Rng*, std::vector<double>*, std::vector<double>*);

KGLM_INSTANTIATE_LOSS(float)
KGLM_INSTANTIATE_LOSS(double)

}  // namespace kglm
