#include "protosum/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace protosum {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

NumericDerivative numeric_derivative(const std::function<ProbeResult(double)>& at, double x,
                                     std::uint64_t base_signature, double step, double min_step) {
    for (double h = step; h >= min_step * 0.999; h /= 10.0) {
        bool same = true;
        double d[2];
        for (int level = 0; level < 2 && same; ++level) {
            const double hh = level == 0 ? h : h / 2.0;
            const auto up = at(x + hh);
            const auto down = at(x - hh);
            same = up.signature == base_signature && down.signature == base_signature;
            d[level] = (up.value - down.value) / (2.0 * hh);
        }
        if (same) return {(4.0 * d[1] - d[0]) / 3.0, true};
    }
    return {0.0, false};
}

GradCheckResult grad_check(const std::function<Var(Graph&, Var)>& f, const Matrix& point,
                           double step) {
    Matrix analytic;
    std::uint64_t base = 0;
    {
        Graph g;
        Var x = g.constant(point);
        Var y = f(g, x);
        base = g.branch_signature();
        g.backward(y);
        analytic = g.grad(x.id());
    }
    Matrix probe = point;
    GradCheckResult result;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const auto nd = numeric_derivative(
            [&](double v) {
                probe[i] = v;
                Graph g(nullptr, false);
                const double y = f(g, g.constant(probe)).scalar();
                return ProbeResult{y, g.branch_signature()};
            },
            point[i], base, step);
        probe[i] = point[i];
        ++result.coordinates;
        if (!nd.smooth) {
            ++result.skipped;
            continue;
        }
        result.max_relative_error =
            std::max(result.max_relative_error, relative_error(analytic[i], nd.value));
    }
    return result;
}

GradCheckResult grad_check_params(ParameterSet& params, const std::function<Var(Graph&)>& loss,
                                  double step) {
    Gradients analytic = zero_gradients(params);
    std::uint64_t base = 0;
    {
        Graph g(&params);
        Var l = loss(g);
        base = g.branch_signature();
        g.backward(l);
        g.accumulate_param_grads(analytic);
    }
    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& value = params.at(p).value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            const auto nd = numeric_derivative(
                [&](double v) {
                    value[i] = v;
                    Graph g(&params, false);
                    const double y = loss(g).scalar();
                    return ProbeResult{y, g.branch_signature()};
                },
                saved, base, step);
            value[i] = saved;
            ++result.coordinates;
            if (!nd.smooth) {
                ++result.skipped;
                continue;
            }
            result.max_relative_error =
                std::max(result.max_relative_error, relative_error(analytic[p][i], nd.value));
        }
    }
    return result;
}

}  // namespace protosum
