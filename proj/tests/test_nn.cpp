#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "protosum/nn.hpp"

using namespace protosum;

namespace {

void set_identity(ParameterSet& params, const Linear& l, double scale) {
    auto& w = params[l.weight].value;
    w.fill(0.0);
    for (std::size_t i = 0; i < std::min(l.in, l.out); ++i) w(i, i) = scale;
    if (l.bias) params[*l.bias].value.fill(0.0);
}

}  // namespace

TEST_CASE("attention focuses on the matching key at large scale") {
    ParameterSet params;
    Rng rng(1);
    const auto mha = MultiHeadAttention::create(params, "att", 4, 1, rng);
    set_identity(params, mha.query, 10.0);
    set_identity(params, mha.key, 10.0);
    set_identity(params, mha.value, 1.0);
    set_identity(params, mha.project, 1.0);
    Graph g(&params, false);
    auto q = g.constant(Matrix::row({1, 0, 0, 0}));
    auto m = g.constant(Matrix(3, 4, std::vector<double>{0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0}));
    const auto out = mha(g, q, m);
    CHECK(out.head0().value()(0, 1) > 1.0 - 1e-12);
    CHECK(out.output.rows() == 1);
    CHECK(out.output.cols() == 4);
}

TEST_CASE("masked attention puts all weight on the one open key") {
    ParameterSet params;
    Rng rng(2);
    const auto mha = MultiHeadAttention::create(params, "att", 8, 2, rng);
    Graph g(&params, false);
    Rng data(3);
    auto q = g.constant(uniform_matrix(3, 8, 1.0, data));
    auto m = g.constant(uniform_matrix(5, 8, 1.0, data));
    Matrix mask(3, 5, kMaskedLogit);
    for (std::size_t r = 0; r < 3; ++r) mask(r, 2) = 0.0;
    const auto out = mha(g, q, m, &mask);
    CHECK(out.weights.size() == 2);
    for (const auto& w : out.weights) {
        for (std::size_t r = 0; r < 3; ++r) {
            CHECK(w.value()(r, 2) == 1.0);
            for (std::size_t c = 0; c < 5; ++c) {
                if (c != 2) CHECK(w.value()(r, c) == 0.0);
            }
        }
    }
    CHECK(out.output.rows() == 3);
    CHECK(out.output.cols() == 8);
}

TEST_CASE("head count must divide the model dimension") {
    ParameterSet params;
    Rng rng(1);
    CHECK_THROWS_AS(MultiHeadAttention::create(params, "att", 6, 4, rng), std::invalid_argument);
}

TEST_CASE("attention rows are distributions") {
    ParameterSet params;
    Rng rng(4);
    const auto block = CrossBlock::create(params, "blk", 8, 2, 16, rng);
    Graph g(&params, false);
    auto x = g.constant(uniform_matrix(4, 8, 1.0, rng));
    auto mem = g.constant(uniform_matrix(6, 8, 1.0, rng));
    const auto mask = causal_mask(4);
    const auto out = block(g, x, mem, &mask);
    for (const auto& w : out.weights) {
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double s = 0.0;
            for (double v : w.value().row_span(r)) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("causal mask and positional encoding") {
    const auto mask = causal_mask(3);
    CHECK(mask(0, 0) == 0.0);
    CHECK(mask(0, 1) == kMaskedLogit);
    CHECK(mask(2, 1) == 0.0);
    const auto pe = positional_encoding(6, 8);
    CHECK(pe(0, 0) == 0.0);
    CHECK(pe(0, 1) == 1.0);
    CHECK(pe(1, 0) == doctest::Approx(std::sin(1.0)));
    CHECK_FALSE(pe.row_span(0)[0] == pe.row_span(5)[0]);
}

TEST_CASE("rng is reproducible and in range") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(a.below(7) == b.below(7));
    }
}
