#include "fregan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fregan {

double GradcheckReport::worst() const {
    double w = 0.0;
    for (double e : max_error) w = std::max(w, e);
    return w;
}

GradcheckReport gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                          const GradcheckOptions& options) {
    for (const Tensor& t : inputs) {
        if (!t.is_leaf() || !t.requires_grad()) {
            throw std::invalid_argument("gradcheck: inputs must be leaves with requires_grad");
        }
    }
    for (Tensor& t : inputs) t.zero_grad();
    backward(loss());

    const double denom_floor = options.abs_floor / options.rel_tol;
    GradcheckReport report;
    for (Tensor& t : inputs) {
        std::vector<float> analytic(t.numel(), 0.0f);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        auto values = t.mutable_data();
        double worst = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const float original = values[i];
            const float up = original + options.step;
            const float down = original - options.step;
            values[i] = up;
            const double plus = loss().item();
            values[i] = down;
            const double minus = loss().item();
            values[i] = original;
            // Divide by the representable step, not the nominal one.
            const double numeric = (plus - minus) / (static_cast<double>(up) - static_cast<double>(down));
            const double a = analytic[i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), denom_floor});
            worst = std::max(worst, std::fabs(a - numeric) / denom);
        }
        report.max_error.push_back(worst);
    }
    return report;
}

}  // namespace fregan
