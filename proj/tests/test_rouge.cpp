#include <map>
#include <vector>

#include "doctest.h"
#include "protosum/nn.hpp"
#include "protosum/rouge.hpp"

using namespace protosum;

TEST_CASE("rouge_n worked examples") {
    const Tokens cand{"the", "cat", "sat"}, ref{"the", "cat"};
    const auto r1 = rouge_n(cand, ref, 1);
    CHECK(r1.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r1.recall == 1.0);
    CHECK(r1.f1 == doctest::Approx(0.8));
    const auto r2 = rouge_n(cand, ref, 2);
    CHECK(r2.precision == 0.5);
    CHECK(r2.recall == 1.0);
    CHECK(r2.f1 == doctest::Approx(2.0 / 3.0));

    const auto same = rouge_n(cand, cand, 2);
    CHECK(same.f1 == 1.0);
    CHECK(rouge_n({"a"}, {"a"}, 2).f1 == 0.0);
    CHECK(rouge_n({}, ref, 1).precision == 0.0);
}

TEST_CASE("rouge_l worked examples") {
    CHECK(rouge_l({"a", "b"}, {"c", "d"}).f1 == 0.0);
    const auto r = rouge_l({"a", "b", "c"}, {"a", "c"});
    CHECK(r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r.recall == 1.0);
    CHECK(lcs_length({"c", "b", "a"}, {"a", "b", "c"}) == 1);
    CHECK(rouge_l({}, {"a"}).f1 == 0.0);
}

TEST_CASE("rouge symmetry and bounds on random pairs") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        Tokens a(1 + rng.below(15)), b(1 + rng.below(15));
        for (auto& t : a) t = std::string(1, static_cast<char>('a' + rng.below(6)));
        for (auto& t : b) t = std::string(1, static_cast<char>('a' + rng.below(6)));
        for (int n : {1, 2}) CHECK(rouge_n(a, b, n).precision == rouge_n(b, a, n).recall);
        CHECK(rouge_l(a, a).f1 == 1.0);
        CHECK(lcs_length(a, b) <= std::min(a.size(), b.size()));
    }
}

TEST_CASE("corpus rouge averages documents") {
    const std::vector<Tokens> cands{{"a", "b"}, {"x"}};
    const std::vector<Tokens> refs{{"a", "b"}, {"y"}};
    const auto r = corpus_rouge(cands, refs);
    CHECK(r.rouge1.f1 == 0.5);
    CHECK(r.rougeL.recall == 0.5);
    CHECK_THROWS(corpus_rouge(cands, {{"a"}}));
}
