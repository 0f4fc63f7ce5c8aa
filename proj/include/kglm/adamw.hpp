#pragma once

#include "kglm/nn.hpp"

namespace kglm {

struct AdamWConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int64_t warmup_steps = 0;  // linear warmup; 0 = constant lr
};

// First/second moment accumulators with the same shapes as the parameters.
template <class T>
struct OptimizerState {
    AdamWConfig hyper;
    Model<T> m, v;
    int64_t step = 0;

    void init(const ModelConfig& cfg, const AdamWConfig& h) {
        hyper = h;
        m.allocate(cfg);
        v.allocate(cfg);
        step = 0;
    }
};

// Bias-corrected Adam update with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + lambda * p)
// Decay is skipped for layer-norm and bias tensors. A non-finite gradient
// aborts the whole step and names the offending tensor.
template <class T>
void adamw_step(Model<T>& params, Model<T>& grads, OptimizerState<T>& state);

}  // namespace kglm
