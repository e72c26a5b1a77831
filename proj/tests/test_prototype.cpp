#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "protosum/extractor.hpp"
#include "protosum/nn.hpp"
#include "protosum/prototype.hpp"

using namespace protosum;

namespace {

Document doc_of_length(std::size_t n) {
    Document d{"d", {{}}, {"x"}};
    for (std::size_t i = 0; i < n; ++i) d.sentences[0].push_back("w" + std::to_string(i));
    return d;
}

ImportanceScores weighted_only(std::vector<double> w) {
    ImportanceScores s;
    s.weighted = std::move(w);
    return s;
}

}  // namespace

TEST_CASE("sentence weighting") {
    const Document doc{"d", {{"a", "b"}, {"c", "d", "e"}}, {"a"}};
    const auto s = weight_by_sentence(doc, {0.9, 0.8, 0.5, 0.5, 0.5});
    CHECK(s.sentence[0] == doctest::Approx(0.85));
    CHECK(s.weighted[0] == doctest::Approx(0.765));
    CHECK(s.weighted[1] == doctest::Approx(0.68));
    CHECK(s.sentence[1] == doctest::Approx(0.5));
    CHECK(s.weighted[2] == doctest::Approx(0.25));
}

TEST_CASE("extract_prototype worked examples") {
    const auto doc = doc_of_length(4);
    CHECK(extract_prototype(doc, weighted_only({0.9, 0.1, 0.8, 0.2}), 2).positions ==
          std::vector<std::size_t>{0, 2});
    CHECK(extract_prototype(doc, weighted_only({0.3, 0.1, 0.8, 0.2}), 4).tokens == doc.flat());
    CHECK(extract_prototype(doc, weighted_only({0.3, 0.1, 0.8, 0.2}), 9).tokens == doc.flat());
    CHECK(extract_prototype(doc, weighted_only({0.5, 0.5, 0.5, 0.5}), 3).positions ==
          std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("top-k is monotone and invariant to positive rescaling") {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        std::vector<double> w(n);
        for (auto& v : w) v = rng.uniform();
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        const std::size_t k = 1 + rng.below(n);
        const auto chosen = top_k_positions(w, all, k);
        CHECK(std::is_sorted(chosen.begin(), chosen.end()));

        auto scaled = w;
        for (auto& v : scaled) v *= 3.5;
        CHECK(top_k_positions(scaled, all, k) == chosen);

        // Lifting an excluded word above the current k-th score includes it.
        double kth = 2.0;
        for (auto p : chosen) kth = std::min(kth, w[p]);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
                auto lifted = w;
                lifted[i] = kth + 0.01;
                const auto again = top_k_positions(lifted, all, k);
                CHECK(std::find(again.begin(), again.end(), i) != again.end());
                break;
            }
        }
    }
}
