#pragma once

#include <cstddef>
#include <vector>

#include "protosum/corpus.hpp"

namespace protosum {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    // overlap / candidate_total and overlap / reference_total; zero when either total is zero.
    static RougeScore from_counts(double overlap, double candidate_total, double reference_total);
};

// Clipped n-gram overlap, n in {1, 2}. No stemming or stopword removal.
RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, int n);

// Longest-common-subsequence score over the whole token sequences.
RougeScore rouge_l(const Tokens& candidate, const Tokens& reference);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct RougeTriple {
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
};

RougeTriple rouge_all(const Tokens& candidate, const Tokens& reference);

// Per-document scores (parallel over documents) averaged in document order.
RougeTriple corpus_rouge(const std::vector<Tokens>& candidates,
                         const std::vector<Tokens>& references);

}  // namespace protosum
