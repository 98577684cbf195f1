#pragma once

#include <vector>

#include "idgen/rng.hpp"
#include "idgen/tensor.hpp"

namespace idgen {

// Elementwise. add() also broadcasts b over a when b.shape is a suffix of
// a.shape (row bias) or a prefix of it (per-sample channel injection);
// suffix wins when both match.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);

// 2-d linear algebra. Reductions accumulate in 64-bit.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Neural ops. conv2d uses the cross-correlation convention; bias may be an
// undefined Tensor. layer_norm normalizes each sample (all non-batch axes)
// and applies a per-channel affine, channel = axis 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
Tensor silu(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
Tensor softmax(const Tensor& x, int axis);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);
Tensor upsample_nearest2x(const Tensor& x);

// Shape ops. reshape shares storage; the others copy.
Tensor reshape(const Tensor& x, const std::vector<int>& new_shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);

// Reductions to scalar / along one axis (axis is removed).
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_axis(const Tensor& x, int axis);

Tensor mse(const Tensor& a, const Tensor& b);

// x of shape [in] or [N,in]; w is [in,out], b is [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Graph-free helpers.
Tensor l2_normalize(const Tensor& v, float eps = 1e-12f);
float cosine(const Tensor& a, const Tensor& b);
Tensor randn(const std::vector<int>& shape, Rng& rng, float stddev = 1.0f,
             bool requires_grad = false);
Tensor rand_uniform(const std::vector<int>& shape, Rng& rng, float lo, float hi,
                    bool requires_grad = false);

}  // namespace idgen
