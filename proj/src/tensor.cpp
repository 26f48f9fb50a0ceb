#include "fregan/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace fregan {

std::string Shape::str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
}

namespace detail {

std::vector<float>& Node::grad_buffer() {
    if (grad.empty()) grad.assign(shape.numel(), 0.0f);
    return grad;
}

}  // namespace detail

namespace {

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw std::invalid_argument("tensor: negative dimension in shape " + shape.str());
    }
    if (values.size() != shape.numel()) {
        throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                    " values do not fill shape " + shape.str());
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = shape;
    node->storage = std::make_shared<std::vector<float>>(std::move(values));
    node->requires_grad = requires_grad;
    return node;
}

const detail::Node& checked(const std::shared_ptr<detail::Node>& node) {
    if (!node) throw std::logic_error("tensor: use of undefined tensor");
    return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(shape, 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    return Tensor(make_leaf(shape, std::vector<float>(shape.numel(), value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> values, bool requires_grad) {
    return Tensor(make_leaf(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return full({1, 1, 1, 1}, value, requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::span<const float> Tensor::data() const {
    const auto& node = checked(node_);
    return {node.storage->data(), node.storage->size()};
}

std::span<float> Tensor::mutable_data() {
    checked(node_);
    return {node_->storage->data(), node_->storage->size()};
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item: tensor of shape " + shape().str() + " is not a scalar");
    return data()[0];
}

float Tensor::at(int n, int c, int h, int w) const {
    const Shape& s = shape();
    if (n < 0 || n >= s.n || c < 0 || c >= s.c || h < 0 || h >= s.h || w < 0 || w >= s.w) {
        throw std::out_of_range("at: index outside " + s.str());
    }
    return data()[((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const float> Tensor::grad() const {
    const auto& node = checked(node_);
    return {node.grad.data(), node.grad.size()};
}

std::span<float> Tensor::mutable_grad() {
    checked(node_);
    auto& g = node_->grad_buffer();
    return {g.data(), g.size()};
}

void Tensor::zero_grad() {
    checked(node_);
    node_->grad.clear();
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }

Tensor Tensor::detach() const {
    const auto& src = checked(node_);
    auto node = std::make_shared<detail::Node>();
    node->shape = src.shape;
    node->storage = src.storage;
    return Tensor(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
    const auto& src = checked(node_);
    return Tensor(make_leaf(src.shape, *src.storage, requires_grad));
}

Tape record_tape(const Tensor& root) {
    Tape tape;
    if (!root.defined() || !root.requires_grad()) return tape;
    // Iterative post-order DFS; each node is emitted once, after its inputs.
    std::unordered_set<const detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            tape.order.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
    if (!(loss.shape() == Shape{1, 1, 1, 1})) {
        throw std::invalid_argument("backward: loss must be a 1x1x1x1 scalar, got " + loss.shape().str());
    }
    if (!loss.requires_grad()) throw std::invalid_argument("backward: loss does not depend on any tensor requiring grad");

    Tape tape = record_tape(loss);
    for (detail::Node* node : tape.order) {
        if (!node->is_leaf()) node->grad.clear();
    }
    loss.node()->grad_buffer()[0] += 1.0f;
    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->is_leaf() || node->grad.empty()) continue;
        node->backward_fn(*node);
    }
}

}  // namespace fregan
