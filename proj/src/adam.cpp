#include "idgen/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace idgen {

AdamState adam_init(const std::vector<Tensor>& params, float lr, float beta1, float beta2,
                    float eps) {
    if (lr <= 0.0f) throw std::runtime_error("adam: lr must be positive");
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor& p : params) {
        s.m.emplace_back(p.numel(), 0.0f);
        s.v.emplace_back(p.numel(), 0.0f);
    }
    return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (state.lr <= 0.0f) throw std::runtime_error("adam: lr must be positive");
    if (params.size() != state.m.size())
        throw std::runtime_error("adam: state does not match parameter list");
    state.step_count += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        if (!p.grad || p.grad->size() != p.numel())
            throw std::runtime_error("adam: parameter has no grad buffer");
        float* w = p.ptr();
        const float* g = p.grad->data();
        float* m = state.m[pi].data();
        float* v = state.v[pi].data();
        const std::size_t n = p.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i];
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            w[i] = static_cast<float>(w[i] - state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

}  // namespace idgen
