#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace idgen {

struct Tensor;

// One autodiff edge. The backward closure accumulates the output's grad
// into the parents' grad buffers.
struct Node {
    std::vector<Tensor> parents;
    std::function<void(Tensor&)> backward;
};

// Dense row-major float tensor, rank <= 4. Storage is shared between
// copies; a tensor is immutable once it has been fed into an op, except
// for its grad buffer. requires_grad implies the grad buffer is allocated,
// so every copy sees the same accumulation.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<float>> data;
    std::shared_ptr<std::vector<float>> grad;
    bool requires_grad = false;
    std::shared_ptr<Node> node;

    Tensor() = default;

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, float value, bool requires_grad = false);
    static Tensor scalar(float value);
    static Tensor from(const std::vector<int>& shape, std::vector<float> values,
                       bool requires_grad = false);

    std::size_t numel() const;
    int rank() const { return static_cast<int>(shape.size()); }
    bool defined() const { return static_cast<bool>(data); }
    bool is_scalar() const { return numel() == 1; }
    float item() const;

    float* ptr() { return data->data(); }
    const float* ptr() const { return data->data(); }
    float& operator[](std::size_t i) { return (*data)[i]; }
    float operator[](std::size_t i) const { return (*data)[i]; }

    void set_requires_grad(bool on);
    void zero_grad();
    Tensor detached() const;  // same storage, no grad, no graph
    Tensor clone() const;     // fresh storage copy, no graph
};

std::size_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Thread-local graph-recording switch. Off inside inference scopes.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// NaN/Inf is an error state; every op calls this on its output.
void check_finite(const Tensor& t, const char* op);

// Reverse-mode sweep from a scalar loss. Leaf grads accumulate across
// calls; intermediate grads are reset at the start of each sweep.
void backward(Tensor& loss);

}  // namespace idgen
