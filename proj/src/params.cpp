#include "fregan/params.hpp"

namespace fregan {

Tensor& ParamSet::add(std::string name, Tensor value) {
    entries_.push_back({std::move(name), std::move(value)});
    return entries_.back().value;
}

const Tensor* ParamSet::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return &e.value;
    }
    return nullptr;
}

void ParamSet::zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
}

bool ParamSet::grads_empty() const {
    for (const auto& e : entries_) {
        if (e.value.has_grad()) return false;
    }
    return true;
}

void ParamSet::extend(const ParamSet& other, const std::string& prefix) {
    for (const auto& e : other.entries()) entries_.push_back({prefix + e.name, e.value});
}

Tensor init_conv_weight(Shape shape, Rng& rng, float stddev) {
    return Tensor::from_data(shape, rng.normal_vector(shape.numel(), 0.0f, stddev), true);
}

Tensor init_constant(int channels, float value) {
    return Tensor::full({1, channels, 1, 1}, value, true);
}

}  // namespace fregan
