#include "idgen/layers.hpp"

#include <cmath>

namespace idgen {

LinearLayer LinearLayer::init(int in, int out, Rng& rng) {
    const float k = 1.0f / std::sqrt(static_cast<float>(in));
    LinearLayer l;
    l.w = rand_uniform({in, out}, rng, -k, k, true);
    l.b = rand_uniform({out}, rng, -k, k, true);
    return l;
}

void LinearLayer::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

void LinearLayer::collect_params(std::vector<Tensor>& out) const {
    out.push_back(w);
    out.push_back(b);
}

Conv2dLayer Conv2dLayer::init(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(in_ch * k * k));
    Conv2dLayer c;
    c.w = rand_uniform({out_ch, in_ch, k, k}, rng, -bound, bound, true);
    c.b = rand_uniform({out_ch}, rng, -bound, bound, true);
    c.stride = stride;
    c.pad = pad;
    return c;
}

void Conv2dLayer::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w", w);
    out.emplace_back(prefix + ".b", b);
}

void Conv2dLayer::collect_params(std::vector<Tensor>& out) const {
    out.push_back(w);
    out.push_back(b);
}

LayerNormLayer LayerNormLayer::init(int channels) {
    LayerNormLayer n;
    n.gamma = Tensor::full({channels}, 1.0f, true);
    n.beta = Tensor::zeros({channels}, true);
    return n;
}

void LayerNormLayer::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
}

void LayerNormLayer::collect_params(std::vector<Tensor>& out) const {
    out.push_back(gamma);
    out.push_back(beta);
}

void LinearLayer::set_trainable(bool on) {
    w.set_requires_grad(on);
    b.set_requires_grad(on);
}

void Conv2dLayer::set_trainable(bool on) {
    w.set_requires_grad(on);
    b.set_requires_grad(on);
}

void LayerNormLayer::set_trainable(bool on) {
    gamma.set_requires_grad(on);
    beta.set_requires_grad(on);
}

}  // namespace idgen
