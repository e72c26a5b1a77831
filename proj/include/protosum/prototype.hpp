#pragma once

#include <cstddef>
#include <vector>

#include "protosum/corpus.hpp"

namespace protosum {

// Per-word importance of one document.
struct ImportanceScores {
    std::vector<double> word;      // p_ext, one per source word, in (0,1)
    std::vector<double> sentence;  // mean word score of each sentence
    std::vector<double> weighted;  // word[l] * sentence[sentence_of(l)]
};

// Combines word scores with their sentence means.
ImportanceScores weight_by_sentence(const Document& doc, std::vector<double> word_scores);

// An order-preserving selection of source words.
struct Prototype {
    std::vector<std::size_t> positions;  // strictly increasing absolute source positions
    Tokens tokens;

    std::size_t size() const { return positions.size(); }
    friend bool operator==(const Prototype&, const Prototype&) = default;
};

// The k highest-scoring candidates (ties: lower position first), returned in
// increasing position order. All candidates are returned when k exceeds their count.
std::vector<std::size_t> top_k_positions(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& candidates,
                                         std::size_t k);

Prototype make_prototype(const Document& doc, std::vector<std::size_t> positions);

}  // namespace protosum
