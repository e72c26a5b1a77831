#include "protosum/batch.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "protosum/parallel.hpp"

namespace protosum {

int available_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool all_finite(const Gradients& grads) {
    for (const auto& g : grads) {
        if (!g.all_finite()) return false;
    }
    return true;
}

BatchGradients batch_gradients_serial(const ParameterSet& params, std::size_t n_examples,
                                      const std::function<Var(Graph&, std::size_t)>& example_loss) {
    BatchGradients out;
    out.grads = zero_gradients(params);
    for (std::size_t i = 0; i < n_examples; ++i) {
        Graph g(&params);
        Var loss = example_loss(g, i);
        g.backward(loss);
        g.accumulate_param_grads(out.grads);
        out.loss += loss.scalar();
        out.floor_hits += g.floor_hits();
    }
    out.finite = std::isfinite(out.loss) && all_finite(out.grads);
    return out;
}

BatchGradients batch_gradients(const ParameterSet& params, std::size_t n_examples,
                               const std::function<Var(Graph&, std::size_t)>& example_loss) {
    if (available_threads() <= 1 || n_examples <= 1) {
        return batch_gradients_serial(params, n_examples, example_loss);
    }
    std::vector<Gradients> per_example(n_examples);
    std::vector<double> losses(n_examples, 0.0);
    std::vector<std::size_t> floors(n_examples, 0);
    parallel_for(n_examples, [&](std::size_t i) {
        per_example[i] = zero_gradients(params);
        Graph g(&params);
        Var loss = example_loss(g, i);
        g.backward(loss);
        g.accumulate_param_grads(per_example[i]);
        losses[i] = loss.scalar();
        floors[i] = g.floor_hits();
    });
    BatchGradients out;
    out.grads = zero_gradients(params);
    for (std::size_t i = 0; i < n_examples; ++i) {
        add_gradients(out.grads, per_example[i]);
        out.loss += losses[i];
        out.floor_hits += floors[i];
    }
    out.finite = std::isfinite(out.loss) && all_finite(out.grads);
    return out;
}

}  // namespace protosum
