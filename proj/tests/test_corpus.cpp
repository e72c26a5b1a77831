#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "protosum/corpus.hpp"

using namespace protosum;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "protosum_unit";
    fs::create_directories(dir);
    return dir / name;
}

Document doc_of(std::string id, std::vector<Tokens> sentences, Tokens summary) {
    return Document{std::move(id), std::move(sentences), std::move(summary)};
}

}  // namespace

TEST_CASE("tokenize") {
    CHECK(tokenize("").empty());
    CHECK(tokenize("The cat sat.") == Tokens{"the", "cat", "sat", "."});
    CHECK(tokenize("U.S. energy-crisis") == Tokens{"u", ".", "s", ".", "energy", "-", "crisis"});
    for (const char* text : {"Hello, World!", "a--b  c", "x.y.z"}) {
        const auto once = tokenize(text);
        CHECK(tokenize(join_tokens(once)) == once);
    }
}

TEST_CASE("build_vocab ranks by count with lexicographic ties") {
    const auto corpus = std::vector<Document>{doc_of("d", {{"a", "a", "b"}}, {"a"})};
    const auto v = build_vocab(corpus, 6, 6);
    CHECK(v.input.tokens() == std::vector<std::string>{"<pad>", "<unk>", "<bos>", "<eos>", "a", "b"});
    CHECK(v.input.id("a") == 4);
    CHECK(v.input.id("b") == 5);

    const auto tiny = build_vocab(corpus, 4, 4);
    CHECK(tiny.input.size() == 4);
    CHECK(tiny.input.id("a") == Vocabulary::kUnk);

    const auto tie = build_vocab({doc_of("d", {{"b", "a", "b", "a"}}, {"x"})}, 6, 6);
    CHECK(tie.input.id("a") == 4);
    CHECK(tie.input.id("b") == 5);
    CHECK_THROWS(build_vocab(corpus, 3, 4));
}

TEST_CASE("vocabulary lookups") {
    const auto v = build_vocab({doc_of("d", {{"x", "y", "z"}}, {"x"})}, 10, 10).input;
    CHECK(v.id("missing") == Vocabulary::kUnk);
    for (int id = 0; id < static_cast<int>(v.size()); ++id) CHECK(v.id(v.token(id)) == id);
}

TEST_CASE("corpus files round-trip") {
    const auto synth = documents_of(synth_corpus(4, 10, SynthParams{}));
    const auto path = temp_file("roundtrip.jsonl");
    write_corpus(path, synth);
    CHECK(read_corpus(path) == synth);

    const auto empty = temp_file("empty.jsonl");
    std::ofstream(empty).close();
    CHECK(read_corpus(empty).empty());
}

TEST_CASE("corpus errors name the field and line") {
    const auto path = temp_file("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"id":"a","sentences":["x y"],"summary":"x"})" << '\n';
        out << R"({"id":"b","sentences":["x y"]})" << '\n';
    }
    std::string msg;
    try {
        read_corpus(path);
    } catch (const std::exception& e) {
        msg = e.what();
    }
    CHECK(msg == "missing field: summary at line 2");

    {
        std::ofstream out(path);
        out << "{not json\n";
    }
    CHECK_THROWS_WITH(read_corpus(path), doctest::Contains("line 1"));
}

TEST_CASE("synthetic corpus") {
    const SynthParams params;
    const auto a = synth_corpus(1, 100, params);
    const auto b = synth_corpus(1, 100, params);
    CHECK(documents_of(a) == documents_of(b));

    std::set<std::size_t> lengths;
    for (const auto& s : a) {
        const auto flat = s.doc.flat();
        // The summary is a subsequence of the source.
        std::size_t j = 0;
        for (const auto& w : flat) {
            if (j < s.doc.summary.size() && w == s.doc.summary[j]) ++j;
        }
        CHECK(j == s.doc.summary.size());
        CHECK(s.salient_words.size() == flat.size());
        lengths.insert(s.doc.summary.size());
    }
    CHECK(lengths.size() >= 5);
}

TEST_CASE("truncate keeps the budget") {
    const auto d = doc_of("d", {{"a", "b", "c"}, {"d", "e"}}, {"a", "b", "d"});
    const auto t = truncate(d, 4, 2);
    CHECK(t.length() == 4);
    CHECK(t.sentences.back() == Tokens{"d"});
    CHECK(t.summary == Tokens{"a", "b"});
    CHECK(d.sentence_offsets() == std::vector<std::size_t>{0, 3});
    CHECK(d.sentence_of_position() == std::vector<std::size_t>{0, 0, 0, 1, 1});
}
