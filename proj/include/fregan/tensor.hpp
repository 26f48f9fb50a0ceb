#pragma once
// Dense N×C×H×W float tensors with reverse-mode differentiation.
//
// Every operation result keeps shared references to its inputs and a
// backward rule. `backward(loss)` orders the reachable graph topologically
// (the tape) and replays the rules in reverse, accumulating into `grad`.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fregan {

struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

namespace detail {

struct Node {
    Shape shape;
    std::shared_ptr<std::vector<float>> storage;
    std::vector<float> grad;  // empty until populated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    float* values() { return storage->data(); }
    const float* values() const { return storage->data(); }
    // Allocates a zero gradient on first use.
    std::vector<float>& grad_buffer();
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const { return shape().numel(); }

    std::span<const float> data() const;
    // Direct writes are meant for leaves (parameters, inputs under test).
    std::span<float> mutable_data();
    float item() const;
    float at(int n, int c, int h, int w) const;

    bool requires_grad() const;
    bool has_grad() const;
    std::span<const float> grad() const;
    std::span<float> mutable_grad();
    void zero_grad();

    bool is_leaf() const;
    // Shares storage, drops the graph and gradient tracking.
    Tensor detach() const;
    // Independent copy of the values as a new leaf.
    Tensor clone(bool requires_grad = false) const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Nodes reachable from a root that take part in differentiation, in
// topological order (inputs before consumers).
struct Tape {
    std::vector<detail::Node*> order;
};

Tape record_tape(const Tensor& root);

// Loss must be 1×1×1×1. Leaf gradients accumulate across calls; gradients
// of intermediate nodes are reset at the start of each call.
void backward(const Tensor& loss);

}  // namespace fregan
