#pragma once

#include <cstddef>

#include "protosum/autodiff.hpp"

namespace protosum {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double epsilon = 1e-9;
    std::size_t warmup_steps = 4000;
    std::size_t model_dim = 512;
    double lr_factor = 1.0;
};

// Inverse-square-root schedule with linear warmup:
//   factor * model_dim^-0.5 * min(step^-0.5, step * warmup^-1.5)
// Maximal at step == warmup. step must be >= 1.
double scheduled_lr(std::size_t step, std::size_t model_dim, std::size_t warmup,
                    double factor = 1.0);

class Adam {
  public:
    Adam(const ParameterSet& params, AdamConfig config);

    // Advances the step counter, then applies one bias-corrected update scaled by
    // the scheduled learning rate. Returns the rate used.
    double step(ParameterSet& params, const Gradients& grads);

    std::size_t steps() const { return step_; }
    const AdamConfig& config() const { return config_; }
    const Gradients& first_moments() const { return m_; }
    const Gradients& second_moments() const { return v_; }

  private:
    AdamConfig config_;
    Gradients m_;
    Gradients v_;
    std::size_t step_ = 0;
};

}  // namespace protosum
