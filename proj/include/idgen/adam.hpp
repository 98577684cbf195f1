#pragma once

#include <vector>

#include "idgen/tensor.hpp"

namespace idgen {

// Adam with bias correction. Moment buffers mirror the parameter list
// passed at init; step() reads each parameter's grad buffer.
struct AdamState {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    long step_count = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;
};

AdamState adam_init(const std::vector<Tensor>& params, float lr, float beta1 = 0.9f,
                    float beta2 = 0.999f, float eps = 1e-8f);

void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace idgen
