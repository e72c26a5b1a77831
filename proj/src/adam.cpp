#include "protosum/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace protosum {

double scheduled_lr(std::size_t step, std::size_t model_dim, std::size_t warmup, double factor) {
    if (step == 0) throw std::invalid_argument("scheduled_lr: step must be >= 1");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(std::max<std::size_t>(warmup, 1));
    return factor * std::pow(static_cast<double>(model_dim), -0.5) *
           std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

Adam::Adam(const ParameterSet& params, AdamConfig config)
    : config_(config), m_(zero_gradients(params)), v_(zero_gradients(params)) {}

double Adam::step(ParameterSet& params, const Gradients& grads) {
    if (grads.size() != params.size() || m_.size() != params.size()) {
        throw std::invalid_argument("Adam::step: gradient count does not match parameters");
    }
    ++step_;
    const double lr =
        scheduled_lr(step_, config_.model_dim, config_.warmup_steps, config_.lr_factor);
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& w = params.at(p).value;
        const auto& g = grads[p];
        if (!g.same_shape(w)) {
            throw std::invalid_argument("Adam::step: gradient shape " + g.shape_string() +
                                        " for parameter " + params.at(p).name + " " +
                                        w.shape_string());
        }
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }
    return lr;
}

}  // namespace protosum
