#pragma once
// Central finite-difference check of analytic gradients.

#include <functional>
#include <vector>

#include "fregan/tensor.hpp"

namespace fregan {

struct GradcheckOptions {
    float step = 1e-3f;
    // Differences below abs_floor are treated as exact: the error of each
    // element is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor / rel_tol).
    double rel_tol = 1e-3;
    double abs_floor = 1e-4;
};

struct GradcheckReport {
    std::vector<double> max_error;  // per input
    double worst() const;
    bool passed(const GradcheckOptions& options = {}) const { return worst() < options.rel_tol; }
};

// `loss` recomputes a scalar from the current values of `inputs`; each input
// must be a leaf with requires_grad. Inputs are perturbed in place and restored.
GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                          const GradcheckOptions& options = {});

}  // namespace fregan
