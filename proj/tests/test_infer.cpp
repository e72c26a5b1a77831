#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "protosum/infer.hpp"
#include "toy.hpp"

using namespace protosum;

namespace {

Hypothesis hyp(Tokens body, double logprob, std::vector<int> ids = {}) {
    Tokens t{kBosToken};
    t.insert(t.end(), body.begin(), body.end());
    return Hypothesis{t, std::move(ids), logprob, true};
}

}  // namespace

TEST_CASE("repeated trigrams") {
    CHECK(repeated_trigrams({"a", "b", "c", "a", "b", "c"}) == 1);
    CHECK(repeated_trigrams({"a", "b"}) == 0);
    CHECK(repeated_trigrams({"a", "a", "a", "a", "a"}) == 2);
}

TEST_CASE("rerank prefers fewer repeats, then logprob") {
    const std::vector<Hypothesis> c{hyp({"a", "b", "c", "a", "b", "c"}, -1.0), hyp({"a", "b", "c"}, -3.0),
                                    hyp({"x", "y", "z"}, -2.0)};
    CHECK(rerank(c).logprob == -2.0);
    const std::vector<Hypothesis> single{hyp({"a", "b", "c", "a", "b", "c"}, -5.0)};
    CHECK(&rerank(single) == &single[0]);
    CHECK_THROWS(rerank({}));
    CHECK(summary_tokens(hyp({"a", kEosToken}, 0.0)) == Tokens{"a"});
}

TEST_CASE("greedy beam follows the argmax at every step") {
    AbstractorModel model(toy::config(), toy::vocabs(), 7);
    Graph g(&model.params(), false);
    const auto enc = model.joint_encode(g, toy::kSource, toy::kPrototype);
    const ExtendedVocab ext(model.vocabs().output, enc.source, enc.prototype);
    const auto beams = beam_search(model, enc, 1, 6);
    REQUIRE(beams.size() == 1);
    Tokens prefix{kBosToken};
    for (std::size_t i = 1; i < beams[0].tokens.size(); ++i) {
        auto step = decode_step(model, enc, prefix, ext);
        for (int banned : {Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kBos}) step.p[banned] = -1.0;
        const auto best = std::max_element(step.p.begin(), step.p.end()) - step.p.begin();
        CHECK(ext.token(static_cast<int>(best)) == beams[0].tokens[i]);
        prefix.push_back(beams[0].tokens[i]);
    }
}

TEST_CASE("beam scores match teacher-forced rescoring") {
    for (std::uint64_t seed : {1, 2, 3}) {
        AbstractorModel model(toy::config(), toy::vocabs(), seed);
        Graph g(&model.params(), false);
        const auto enc = model.joint_encode(g, toy::kSource, toy::kPrototype);
        const auto beams = beam_search(model, enc, 4, 8);
        REQUIRE(!beams.empty());
        CHECK(beams.size() <= 4);
        std::set<Tokens> distinct;
        for (std::size_t i = 0; i < beams.size(); ++i) {
            const auto& h = beams[i];
            distinct.insert(h.tokens);
            if (i > 0) CHECK(beams[i - 1].logprob >= h.logprob);
            CHECK(h.ids.size() + 1 == h.tokens.size());
            CHECK(h.ids.size() <= 8);
            Tokens targets(h.tokens.begin() + 1, h.tokens.end());
            if (targets.back() != kEosToken) continue;  // capped at max_len
            CHECK(std::abs(sequence_logprob(model, enc, targets).logprob - h.logprob) < 1e-9);
        }
        CHECK(distinct.size() == beams.size());
    }
}

TEST_CASE("beam search argument checks") {
    AbstractorModel model(toy::config(), toy::vocabs(), 1);
    Graph g(&model.params(), false);
    const auto enc = model.joint_encode(g, toy::kSource, toy::kPrototype);
    CHECK_THROWS(beam_search(model, enc, 0, 5));
    CHECK_THROWS(beam_search(model, enc, 2, 0));
}

TEST_CASE("summarize") {
    const Document doc{"d", {{"a", "b", "c"}, {"d", "e"}}, {"b", "c"}};
    ExtractorConfig ec;
    ec.d_model = 8;
    ec.n_blocks = 1;
    ec.ffn_width = 16;
    ExtractorModel extractor(ec, toy::vocabs().input, 1);
    AbstractorModel abstractor(toy::config(), toy::vocabs(), 2);

    const auto full = summarize(extractor, abstractor, doc, 9, std::nullopt);
    CHECK(full.prototype.tokens == doc.flat());
    const auto two = summarize(extractor, abstractor, doc, 2, std::nullopt);
    CHECK(two.prototype.size() == 2);
    CHECK(two.k == 2);
    const auto again = summarize(extractor, abstractor, doc, 2, std::nullopt);
    CHECK(again.summary == two.summary);
    CHECK(again.logprob == two.logprob);
    CHECK(summarize(extractor, abstractor, doc, std::nullopt, 3).k == 3);
    CHECK_THROWS_WITH(summarize(extractor, abstractor, doc, std::nullopt, std::nullopt),
                      doctest::Contains("--k"));

    const auto corpus = summarize_corpus(extractor, abstractor, {doc, doc}, 2, std::nullopt);
    CHECK(corpus[1].summary == two.summary);
}
