#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "protosum/autodiff.hpp"

namespace protosum {

struct BatchGradients {
    double loss = 0.0;
    Gradients grads;
    std::size_t floor_hits = 0;
    bool finite = true;
};

// Builds one graph per example (example_loss returns that example's share of the
// batch loss), back-propagates each, and sums the gradients in example order.
// Examples run on OpenMP threads when more than one is available; the ordered
// reduction makes the result bit-identical for any thread count.
BatchGradients batch_gradients(const ParameterSet& params, std::size_t n_examples,
                               const std::function<Var(Graph&, std::size_t)>& example_loss);

// Same computation on the calling thread only. Kept as the reference for
// batch_gradients and for benchmarking.
BatchGradients batch_gradients_serial(const ParameterSet& params, std::size_t n_examples,
                                      const std::function<Var(Graph&, std::size_t)>& example_loss);

bool all_finite(const Gradients& grads);

int available_threads();

}  // namespace protosum
