#include "kglm/adamw.hpp"

#include <cmath>

namespace kglm {

template <class T>
void adamw_step(Model<T>& params, Model<T>& grads, OptimizerState<T>& state) {
    auto p = param_refs(params);
    auto g = param_refs(grads);
    auto m = param_refs(state.m);
    auto v = param_refs(state.v);

    for (size_t t = 0; t < p.size(); ++t)
        for (int64_t i = 0; i < g[t].size; ++i)
            if (!std::isfinite(double(g[t].data[i])))
                throw DivergenceError("non-finite gradient in tensor " + g[t].name);

    const auto& h = state.hyper;
    ++state.step;
    double lr = h.lr;
    if (h.warmup_steps > 0)
        lr *= std::min(1.0, double(state.step) / double(h.warmup_steps));
    const double bc1 = 1.0 - std::pow(h.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(h.beta2, double(state.step));

    for (size_t t = 0; t < p.size(); ++t) {
        const T b1 = T(h.beta1), b2 = T(h.beta2);
        const T one_m_b1 = T(1.0 - h.beta1), one_m_b2 = T(1.0 - h.beta2);
        const T inv_bc1 = T(1.0 / bc1), inv_bc2 = T(1.0 / bc2);
        const T eps = T(h.eps);
        const T step_size = T(lr);
        const T decay = p[t].decay ? T(h.weight_decay) : T(0);
        T* pp = p[t].data;
        T* gg = g[t].data;
        T* mm = m[t].data;
        T* vv = v[t].data;
        for (int64_t i = 0; i < p[t].size; ++i) {
            mm[i] = b1 * mm[i] + one_m_b1 * gg[i];
            vv[i] = b2 * vv[i] + one_m_b2 * gg[i] * gg[i];
            T m_hat = mm[i] * inv_bc1;
            T v_hat = vv[i] * inv_bc2;
            pp[i] -= step_size * (m_hat / (std::sqrt(v_hat) + eps) + decay * pp[i]);
        }
    }
}

template void adamw_step(Model<float>&, Model<float>&, OptimizerState<float>&);
template void adamw_step(Model<double>&, Model<double>&, OptimizerState<double>&);

}  // namespace kglm
