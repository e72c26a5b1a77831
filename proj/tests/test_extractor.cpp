#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "protosum/extractor.hpp"
#include "protosum/labeler.hpp"

using namespace protosum;

namespace {

ExtractorConfig small_config() {
    ExtractorConfig c;
    c.d_model = 16;
    c.n_blocks = 1;
    c.n_heads = 2;
    c.ffn_width = 32;
    return c;
}

}  // namespace

TEST_CASE("scores lie strictly inside (0,1) and follow the sentence law") {
    const auto docs = documents_of(synth_corpus(2, 5, SynthParams{}));
    const auto vocabs = build_vocab(docs, 1000, 1000);
    ExtractorModel model(small_config(), vocabs.input, 3);
    for (const auto& d : docs) {
        const auto s = score_words(model, d);
        REQUIRE(s.word.size() == d.length());
        REQUIRE(s.sentence.size() == d.sentences.size());
        const auto sent = d.sentence_of_position();
        for (std::size_t l = 0; l < s.word.size(); ++l) {
            CHECK(s.word[l] > 0.0);
            CHECK(s.word[l] < 1.0);
            CHECK(s.weighted[l] == doctest::Approx(s.word[l] * s.sentence[sent[l]]));
        }
    }
}

TEST_CASE("loss is ln 2 per word when every score is one half") {
    const auto docs = documents_of(synth_corpus(2, 4, SynthParams{}));
    const auto examples = label_corpus(docs);
    ExtractorModel model(small_config(), build_vocab(docs, 1000, 1000).input, 3);
    auto& params = model.params();
    params[*params.find("extractor.head.weight")].value.fill(0.0);
    params[*params.find("extractor.head.bias")].value.fill(0.0);
    CHECK(extractor_eval_loss(model, examples) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    Graph g(&model.params());
    CHECK(extractor_loss(g, model, examples[0]).scalar() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("training learns the synthetic salience rule") {
    const auto docs = documents_of(synth_corpus(6, 240, SynthParams{}));
    const auto examples = label_corpus(docs);
    const std::vector<LabeledExample> train(examples.begin(), examples.begin() + 200);
    const std::vector<LabeledExample> valid(examples.begin() + 200, examples.end());
    ExtractorModel model(small_config(), build_vocab(docs, 1000, 1000).input, 4);
    TrainConfig tc;
    tc.epochs = 8;
    tc.warmup_steps = 40;
    tc.lr_factor = 2.0;
    const auto result = train_extractor(model, train, valid, tc);
    CHECK(result.epochs.size() == 8);
    CHECK(result.epochs.front().train_loss > result.epochs.back().train_loss);
    CHECK(word_label_f1(model, valid) >= 0.99);
}

TEST_CASE("extractor checkpoints reload bit-exact") {
    const auto docs = documents_of(synth_corpus(2, 3, SynthParams{}));
    ExtractorModel model(small_config(), build_vocab(docs, 1000, 1000).input, 5);
    const auto dir = std::filesystem::temp_directory_path() / "protosum_unit_extractor";
    model.save(dir);
    const auto back = ExtractorModel::load(dir);
    CHECK(back.vocab().tokens() == model.vocab().tokens());
    for (std::size_t i = 0; i < model.params().size(); ++i) {
        CHECK(back.params().at(i).value == model.params().at(i).value);
    }
    CHECK(score_words(back, docs[0]).word == score_words(model, docs[0]).word);
}
