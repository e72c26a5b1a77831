#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "protosum/abstractor.hpp"
#include "protosum/extractor.hpp"

namespace protosum {

struct Hypothesis {
    Tokens tokens;        // starts with <bos>
    std::vector<int> ids; // extended-vocabulary ids of tokens after <bos>
    double logprob = 0.0;
    bool finished = false;
};

// Beam search over the mixture distribution. max_len counts generated tokens
// (the <eos> included) and is clamped to the model's decoder budget. Returns at
// most n_beam hypotheses sorted by logprob, ties by token ids.
std::vector<Hypothesis> beam_search(const AbstractorModel& model, const EncodedPair& encoded,
                                    std::size_t n_beam, std::size_t max_len);

// Occurrences beyond the first of each distinct trigram.
std::size_t repeated_trigrams(const Tokens& tokens);

// Fewest repeated trigrams, then higher logprob, then smaller token ids.
const Hypothesis& rerank(const std::vector<Hypothesis>& candidates);

// Summary tokens of a hypothesis: <bos> and a final <eos> removed.
Tokens summary_tokens(const Hypothesis& h);

struct InferConfig {
    std::size_t n_beam = 5;
    std::size_t extra_len = 10;  // max_len = 2K + extra_len
};

struct SummaryResult {
    std::size_t k = 0;
    Prototype prototype;
    Tokens summary;
    double logprob = 0.0;
    std::size_t repeated = 0;
};

// K given: prototype of min(K, L) words. K absent: `standard_k` is used, which is
// the bin of the mean validation summary length stored with the abstractor.
SummaryResult summarize(const ExtractorModel& extractor, const AbstractorModel& abstractor,
                        const Document& doc, std::optional<std::size_t> k,
                        std::optional<std::size_t> standard_k, const InferConfig& config = {});

// Documents decode in parallel; results keep corpus order.
std::vector<SummaryResult> summarize_corpus(const ExtractorModel& extractor,
                                            const AbstractorModel& abstractor,
                                            const std::vector<Document>& docs,
                                            std::optional<std::size_t> k,
                                            std::optional<std::size_t> standard_k,
                                            const InferConfig& config = {});

}  // namespace protosum
