#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "protosum/corpus.hpp"
#include "protosum/prototype.hpp"

namespace protosum {

// (summary index t, absolute source position l(t))
using AlignmentPair = std::pair<std::size_t, std::size_t>;
using Alignment = std::vector<AlignmentPair>;

struct LabeledExample {
    Document doc;
    std::vector<std::size_t> oracle_sentences;  // sorted
    std::vector<int> labels;                    // r_l over all source words
    Alignment alignment;
    std::size_t k = 0;                          // length bin of the summary
    std::optional<Prototype> gold_prototype;    // filled once an extractor is trained
};

// Greedy sentence selection maximizing mean(ROUGE-1 recall, ROUGE-2 recall) of the
// selected sentences (concatenated in index order) against the summary. The first
// pick is always taken; later picks need a strictly positive gain. Ties go to the
// lowest index. Returns sorted indices.
std::vector<std::size_t> select_oracle_sentences(const Document& doc);

// Objective used by the greedy selection, exposed for tests.
double oracle_objective(const Document& doc, const std::vector<std::size_t>& sentences);

// Flattened words of the given sentences with their absolute source positions.
std::vector<std::pair<std::string, std::size_t>> oracle_words(
    const Document& doc, const std::vector<std::size_t>& sentences);

// LCS alignment between summary and oracle words. The backtrace walks forward and
// on ties prefers a match, then advancing the oracle, then advancing the summary.
Alignment align_lcs(const Tokens& summary,
                    const std::vector<std::pair<std::string, std::size_t>>& oracle);

// r_l = 1 exactly at aligned positions. Throws std::logic_error if an aligned
// position lies outside the oracle sentences.
std::vector<int> make_labels(const Document& doc, const std::vector<std::size_t>& oracle_sentences,
                             const Alignment& alignment);

// Multiple of 5 nearest to T, at least 5.
std::size_t bin_length(std::size_t summary_length);

// Top-k weighted words restricted to the oracle sentences, in source order.
Prototype make_gold_prototype(const Document& doc,
                              const std::vector<std::size_t>& oracle_sentences,
                              const ImportanceScores& scores, std::size_t k);

// Oracle, alignment, labels and length bin for one document (no gold prototype).
LabeledExample label_document(const Document& doc);

std::vector<LabeledExample> label_corpus(const std::vector<Document>& corpus);

// -- label files ---------------------------------------------------------------------
// One JSON object per line with id, oracle_sentences, labels, alignment ([t, l] pairs),
// K and gold_prototype_positions (empty until prototypes are generated). Records are
// joined to documents by id.

void write_labels(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> read_labels(const std::filesystem::path& path,
                                        const std::vector<Document>& corpus);

}  // namespace protosum
