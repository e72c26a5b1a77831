#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace protosum {

using Tokens = std::vector<std::string>;

struct Document {
    std::string id;
    std::vector<Tokens> sentences;
    Tokens summary;

    // Total source length L.
    std::size_t length() const;
    // Source words in reading order.
    Tokens flat() const;
    // Sentence index of every source position.
    std::vector<std::size_t> sentence_of_position() const;
    // First absolute position of every sentence.
    std::vector<std::size_t> sentence_offsets() const;

    friend bool operator==(const Document&, const Document&) = default;
};

// Lowercases ASCII letters, splits every ASCII punctuation character into its own
// token and drops whitespace. Bytes >= 0x80 are kept as word characters.
Tokens tokenize(std::string_view text);
std::string join_tokens(const Tokens& tokens);

// Keeps at most `budget` source words (later sentences are cut or dropped) and at
// most `summary_budget` summary words.
Document truncate(const Document& doc, std::size_t budget, std::size_t summary_budget);

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;
    static constexpr std::size_t kReserved = 4;

    Vocabulary();
    // Ranks by count (descending, ties lexicographic) and keeps the top cap - 4.
    static Vocabulary from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                  std::size_t cap);
    static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);

    int id(const std::string& token) const;  // kUnk when absent
    bool contains(const std::string& token) const;
    const std::string& token(int id) const;
    std::size_t size() const { return id_to_token_.size(); }
    const std::vector<std::string>& tokens() const { return id_to_token_; }

    std::vector<int> encode(const Tokens& tokens) const;

  private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

struct Vocabularies {
    Vocabulary input;
    Vocabulary output;
};

// Counts source and summary tokens over the corpus. Caps must be >= 4.
Vocabularies build_vocab(const std::vector<Document>& corpus, std::size_t input_cap,
                         std::size_t output_cap);

// -- corpus files ----------------------------------------------------------------
// One JSON object per line: {"id": str, "sentences": [str, ...], "summary": str}.
// Raw text is tokenized on load; blank lines are skipped.

std::vector<Document> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& corpus);
Document document_from_json(const nlohmann::json& record, std::size_t line);
nlohmann::json document_to_json(const Document& doc);

// -- synthetic corpus --------------------------------------------------------------

struct SynthParams {
    std::size_t vocab_size = 60;
    std::size_t n_sentences = 4;
    std::size_t sentence_len = 10;
    double salient_fraction = 0.5;
};

struct SynthDocument {
    Document doc;
    std::vector<bool> salient_sentences;
    // Word-level salience mask over the flattened source: 1 for every word the
    // summary was built from.
    std::vector<int> salient_words;
};

// Each document draws one topic; its salient sentences open with that topic's
// marker token and use that topic's words, the other sentences use other topics
// and carry no marker. The summary is the salient sentences without their
// markers, in source order.
std::vector<SynthDocument> synth_corpus(std::uint64_t seed, std::size_t n_docs,
                                        const SynthParams& params);

std::vector<Document> documents_of(const std::vector<SynthDocument>& synth);

}  // namespace protosum
