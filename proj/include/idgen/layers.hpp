#pragma once

#include <string>
#include <utility>
#include <vector>

#include "idgen/ops.hpp"
#include "idgen/rng.hpp"
#include "idgen/tensor.hpp"

namespace idgen {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// requires_grad is a per-copy flag, so freezing has to touch the layer
// members themselves; collected copies still share data and grad storage.
struct LinearLayer {
    Tensor w;  // [in, out]
    Tensor b;  // [out]

    static LinearLayer init(int in, int out, Rng& rng);
    Tensor forward(const Tensor& x) const { return linear(x, w, b); }
    void collect(const std::string& prefix, NamedTensors& out) const;
    void collect_params(std::vector<Tensor>& out) const;
    void set_trainable(bool on);
};

struct Conv2dLayer {
    Tensor w;  // [out_ch, in_ch, k, k]
    Tensor b;  // [out_ch]
    int stride = 1;
    int pad = 0;

    static Conv2dLayer init(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng);
    Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
    void collect(const std::string& prefix, NamedTensors& out) const;
    void collect_params(std::vector<Tensor>& out) const;
    void set_trainable(bool on);
};

struct LayerNormLayer {
    Tensor gamma;  // [channels]
    Tensor beta;   // [channels]

    static LayerNormLayer init(int channels);
    Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void collect(const std::string& prefix, NamedTensors& out) const;
    void collect_params(std::vector<Tensor>& out) const;
    void set_trainable(bool on);
};

}  // namespace idgen
