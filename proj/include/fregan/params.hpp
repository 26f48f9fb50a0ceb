#pragma once
// Named trainable tensors.

#include <string>
#include <vector>

#include "fregan/rng.hpp"
#include "fregan/tensor.hpp"

namespace fregan {

struct NamedTensor {
    std::string name;
    Tensor value;
};

class ParamSet {
public:
    // Registers an existing tensor handle; the set and the owner share storage.
    Tensor& add(std::string name, Tensor value);
    const std::vector<NamedTensor>& entries() const { return entries_; }
    std::vector<NamedTensor>& entries() { return entries_; }
    std::size_t size() const { return entries_.size(); }
    const Tensor* find(const std::string& name) const;
    void zero_grad();
    // True when no parameter holds a gradient buffer.
    bool grads_empty() const;
    // Appends all entries of `other` with a name prefix.
    void extend(const ParamSet& other, const std::string& prefix = "");

private:
    std::vector<NamedTensor> entries_;
};

// Initializers following the conventional GAN recipe.
Tensor init_conv_weight(Shape shape, Rng& rng, float stddev = 0.02f);
Tensor init_constant(int channels, float value);

// Detached view when `frozen`, so gradients stop at the parameter.
inline Tensor use(const Tensor& param, bool frozen) { return frozen ? param.detach() : param; }

}  // namespace fregan
