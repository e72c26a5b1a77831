#include "protosum/prototype.hpp"

#include <algorithm>
#include <stdexcept>

namespace protosum {

ImportanceScores weight_by_sentence(const Document& doc, std::vector<double> word_scores) {
    if (word_scores.size() != doc.length()) {
        throw std::invalid_argument("weight_by_sentence: " + std::to_string(word_scores.size()) +
                                    " scores for " + std::to_string(doc.length()) + " words");
    }
    ImportanceScores s;
    s.word = std::move(word_scores);
    s.sentence.reserve(doc.sentences.size());
    std::size_t l = 0;
    for (const auto& sent : doc.sentences) {
        double total = 0.0;
        for (std::size_t i = 0; i < sent.size(); ++i) total += s.word[l + i];
        s.sentence.push_back(total / static_cast<double>(sent.size()));
        l += sent.size();
    }
    const auto sentence_of = doc.sentence_of_position();
    s.weighted.resize(s.word.size());
    for (std::size_t i = 0; i < s.word.size(); ++i) {
        s.weighted[i] = s.word[i] * s.sentence[sentence_of[i]];
    }
    return s;
}

std::vector<std::size_t> top_k_positions(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& candidates,
                                         std::size_t k) {
    std::vector<std::size_t> ranked = candidates;
    for (auto p : ranked) {
        if (p >= scores.size()) throw std::invalid_argument("top_k_positions: position out of range");
    }
    const auto take = std::min(k, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take),
                      ranked.end(), [&](std::size_t a, std::size_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    ranked.resize(take);
    std::sort(ranked.begin(), ranked.end());
    return ranked;
}

Prototype make_prototype(const Document& doc, std::vector<std::size_t> positions) {
    const auto flat = doc.flat();
    Prototype p;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= flat.size() || (i > 0 && positions[i] <= positions[i - 1])) {
            throw std::invalid_argument("prototype positions must be increasing source positions");
        }
        p.tokens.push_back(flat[positions[i]]);
    }
    p.positions = std::move(positions);
    return p;
}

}  // namespace protosum
