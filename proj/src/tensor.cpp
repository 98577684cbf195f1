#include "idgen/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace idgen {

std::size_t numel_of(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::runtime_error("tensor: non-positive dim in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

static void check_rank(const std::vector<int>& shape) {
    if (shape.size() > 4) throw std::runtime_error("tensor: rank > 4 not supported " + shape_str(shape));
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    check_rank(shape);
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<float>>(numel_of(shape), 0.0f);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(const std::vector<int>& shape, float value, bool requires_grad) {
    Tensor t = zeros(shape, requires_grad);
    for (float& v : *t.data) v = value;
    return t;
}

Tensor Tensor::scalar(float value) {
    return full({1}, value);
}

Tensor Tensor::from(const std::vector<int>& shape, std::vector<float> values, bool requires_grad) {
    check_rank(shape);
    if (numel_of(shape) != values.size())
        throw std::runtime_error("tensor: " + std::to_string(values.size()) +
                                 " values for shape " + shape_str(shape));
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<float>>(std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
}

std::size_t Tensor::numel() const {
    return data ? data->size() : 0;
}

float Tensor::item() const {
    if (numel() != 1) throw std::runtime_error("item: tensor is not scalar " + shape_str(shape));
    return (*data)[0];
}

void Tensor::set_requires_grad(bool on) {
    requires_grad = on;
    if (on && !grad) {
        grad = std::make_shared<std::vector<float>>(numel(), 0.0f);
    } else if (!on) {
        zero_grad();
    }
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0f);
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<float>>(*data);
    return t;
}

static thread_local bool g_grad_enabled = true;

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void check_finite(const Tensor& t, const char* op) {
    for (float v : *t.data) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string(op) + ": non-finite element in output " +
                                     shape_str(t.shape));
        }
    }
}

void backward(Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw std::runtime_error("backward: loss must be a defined scalar");
    if (!loss.requires_grad) return;

    if (!loss.node) {
        (*loss.grad)[0] += 1.0f;
        return;
    }

    // Post-order DFS over nodes gives a topological order of op outputs.
    std::vector<Tensor> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Tensor t;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    seen.insert(loss.node.get());
    stack.push_back({loss, 0});
    while (!stack.empty()) {
        Frame& f = stack.back();
        Node* n = f.t.node.get();
        if (f.next_parent < n->parents.size()) {
            Tensor& p = n->parents[f.next_parent++];
            if (p.node && seen.insert(p.node.get()).second) {
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.t);
            stack.pop_back();
        }
    }

    // Intermediates get fresh grads each sweep; leaves accumulate.
    for (Tensor& t : order) t.zero_grad();
    (*loss.grad)[0] = 1.0f;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        it->node->backward(*it);
    }
}

}  // namespace idgen
