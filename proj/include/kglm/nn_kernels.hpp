#pragma once

// Shared dense/normalization kernels used by the encoder and the loss heads.

#include <cmath>
#include <cstdint>
#include <vector>

#include "kglm/nn.hpp"

namespace kglm::kernels {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class T>
inline T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(kInvSqrt2)));
}

template <class T>
inline T gelu_grad(T x) {
    return T(0.5) * (T(1) + std::erf(x * T(kInvSqrt2))) +
           x * T(kInvSqrt2Pi) * std::exp(T(-0.5) * x * x);
}

// y = g .* (x - mu) / sigma + b per row; hat and rstd cached for backward
template <class T>
void layernorm_forward(const Mat<T>& x, const Vec<T>& g, const Vec<T>& b, Mat<T>& hat,
                       Vec<T>& rstd, Mat<T>& y) {
    const auto n = x.rows();
    const auto d = x.cols();
    hat.resize(n, d);
    y.resize(n, d);
    rstd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        T mu = x.row(i).mean();
        T var = (x.row(i).array() - mu).square().sum() / T(d);
        T rs = T(1) / std::sqrt(var + T(kLnEps));
        rstd[i] = rs;
        hat.row(i) = ((x.row(i).array() - mu) * rs).matrix();
        y.row(i) = (hat.row(i).array() * g.transpose().array() + b.transpose().array()).matrix();
    }
}

template <class T>
void layernorm_backward(const Mat<T>& dy, const Mat<T>& hat, const Vec<T>& rstd,
                        const Vec<T>& g, Mat<T>& dx, Vec<T>& dg, Vec<T>& db) {
    const auto n = dy.rows();
    const auto d = dy.cols();
    dx.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        dg.array() += (dy.row(i).array() * hat.row(i).array()).transpose();
        db.array() += dy.row(i).transpose().array();
        auto dhat = (dy.row(i).array() * g.transpose().array()).eval();
        T m1 = dhat.mean();
        T m2 = (dhat * hat.row(i).array()).mean();
        dx.row(i) = (rstd[i] * (dhat - m1 - hat.row(i).array() * m2)).matrix();
    }
}

// y = x * W^T + b
template <class T>
void linear_forward(const Mat<T>& x, const Mat<T>& w, const Vec<T>& b, Mat<T>& y) {
    y.noalias() = x * w.transpose();
    y.rowwise() += b.transpose();
}

// accumulates dW and db; writes dx when non-null
template <class T>
void linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& dw, Vec<T>& db,
                     Mat<T>* dx) {
    dw.noalias() += dy.transpose() * x;
    db.noalias() += dy.colwise().sum().transpose();
    if (dx) dx->noalias() = dy * w;
}

template <class T>
void apply_dropout(Mat<T>& x, std::vector<uint8_t>& mask, double rate, bool training, Rng* rng) {
    if (!training || rate <= 0.0) {
        mask.clear();
        return;
    }
    mask.resize(static_cast<size_t>(x.size()));
    const T scale = T(1.0 / (1.0 - rate));
    T* p = x.data();
    for (size_t i = 0; i < mask.size(); ++i) {
        bool keep = rng->real() >= rate;
        mask[i] = keep;
        p[i] = keep ? p[i] * scale : T(0);
    }
}

template <class T>
void dropout_backward(Mat<T>& dx, const std::vector<uint8_t>& mask, double rate) {
    if (mask.empty()) return;
    const T scale = T(1.0 / (1.0 - rate));
    T* p = dx.data();
    for (size_t i = 0; i < mask.size(); ++i) p[i] = mask[i] ? p[i] * scale : T(0);
}

}  // namespace kglm::kernels
