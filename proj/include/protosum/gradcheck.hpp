#pragma once

#include <functional>

#include "protosum/autodiff.hpp"

namespace protosum {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t coordinates = 0;
    // Coordinates where every probe step crossed a relu kink or log floor; not compared.
    std::size_t skipped = 0;
};

// Relative discrepancy used by every check: |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

// Numeric derivative of a scalar function of one coordinate. Central differences at
// h and h/2 combined by Richardson extrapolation, so truncation error is O(h^4) and a
// fairly large h keeps roundoff small. If a probe lands on a different branch than the
// base point, h is divided by 10 (down to min_step) and the probe is retried.
struct NumericDerivative {
    double value = 0.0;
    bool smooth = true;
};

struct ProbeResult {
    double value;
    std::uint64_t signature;
};

NumericDerivative numeric_derivative(const std::function<ProbeResult(double)>& at, double x,
                                     std::uint64_t base_signature, double step = 1e-3,
                                     double min_step = 1e-7);

// Compares backward() against the numeric derivative for every coordinate of `point`.
// f builds a scalar from its input variable.
GradCheckResult grad_check(const std::function<Var(Graph&, Var)>& f, const Matrix& point,
                           double step = 1e-3);

// Same comparison over every coordinate of every parameter in `params`.
// `loss` builds a scalar loss on a graph bound to `params`. Parameter values
// are restored before returning.
GradCheckResult grad_check_params(ParameterSet& params, const std::function<Var(Graph&)>& loss,
                                  double step = 1e-3);

}  // namespace protosum
