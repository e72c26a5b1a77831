#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "protosum/kernels.hpp"
#include "protosum/nn.hpp"
#include "protosum/tensor.hpp"

using namespace protosum;
using kernels::Trans;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

}  // namespace

TEST_CASE("matrix basics") {
    Matrix m(2, 3, 1.5);
    CHECK(m.size() == 6);
    CHECK(m(1, 2) == 1.5);
    m(0, 1) = 4.0;
    CHECK(m[1] == 4.0);
    CHECK(m.row_span(0)[1] == 4.0);
    CHECK(m.shape_string() == "[2x3]");
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);

    Matrix other(2, 3, 1.0);
    m.add_inplace(other);
    CHECK(m(0, 1) == 5.0);
    CHECK(m.all_finite());
    m[0] = std::numeric_limits<double>::infinity();
    CHECK_FALSE(m.all_finite());
}

TEST_CASE("gemm matches the reference loop for every transpose combination") {
    Rng rng(7);
    // Includes sizes that leave a remainder after the four-row blocks.
    const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 2}, {4, 4, 4}, {7, 9, 6}, {13, 64, 64}, {70, 70, 70}};
    for (auto ta : {Trans::kNo, Trans::kYes}) {
        for (auto tb : {Trans::kNo, Trans::kYes}) {
            for (const auto& s : shapes) {
                const auto m = s[0], n = s[1], k = s[2];
                const auto a = random_values(m * k, rng);
                const auto b = random_values(k * n, rng);
                for (bool acc : {false, true}) {
                    auto c0 = random_values(m * n, rng);
                    auto c1 = c0;
                    kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), c0.data(), acc);
                    kernels::gemm_reference(ta, tb, m, n, k, a.data(), b.data(), c1.data(), acc);
                    double worst = 0.0;
                    for (std::size_t i = 0; i < c0.size(); ++i) {
                        worst = std::max(worst, std::abs(c0[i] - c1[i]) / (1.0 + std::abs(c1[i])));
                    }
                    CHECK(worst < 1e-13);
                }
            }
        }
    }
}

TEST_CASE("softmax kernel") {
    const double x[] = {0.0, 0.0, 0.0, 1.0, 2.0, 3.0};
    double out[6];
    kernels::softmax_rows(2, 3, x, nullptr, out);
    for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(1.0 / 3.0));
    CHECK(out[3] + out[4] + out[5] == doctest::Approx(1.0).epsilon(1e-15));

    const double mask[] = {0.0, -1e9, -1e9, 0.0, 0.0, -1e9};
    kernels::softmax_rows(2, 3, x, mask, out);
    CHECK(out[0] == 1.0);
    CHECK(out[1] == 0.0);
    CHECK(out[5] == 0.0);
}
