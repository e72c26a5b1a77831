#include "protosum/rouge.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace protosum {

RougeScore RougeScore::from_counts(double overlap, double candidate_total,
                                   double reference_total) {
    RougeScore s;
    if (candidate_total <= 0.0 || reference_total <= 0.0) return s;
    s.precision = overlap / candidate_total;
    s.recall = overlap / reference_total;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
}

namespace {

std::unordered_map<std::string, std::size_t> ngram_counts(const Tokens& tokens, int n) {
    std::unordered_map<std::string, std::size_t> counts;
    const auto un = static_cast<std::size_t>(n);
    if (tokens.size() < un) return counts;
    for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t j = 1; j < un; ++j) {
            key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

RougeScore rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
    if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [g, c] : cand) {
        cand_total += c;
        if (auto it = ref.find(g); it != ref.end()) overlap += std::min(c, it->second);
    }
    for (const auto& [g, c] : ref) ref_total += c;
    return RougeScore::from_counts(static_cast<double>(overlap), static_cast<double>(cand_total),
                                   static_cast<double>(ref_total));
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(const Tokens& candidate, const Tokens& reference) {
    return RougeScore::from_counts(static_cast<double>(lcs_length(candidate, reference)),
                                   static_cast<double>(candidate.size()),
                                   static_cast<double>(reference.size()));
}

RougeTriple rouge_all(const Tokens& candidate, const Tokens& reference) {
    return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2),
            rouge_l(candidate, reference)};
}

RougeTriple corpus_rouge(const std::vector<Tokens>& candidates,
                         const std::vector<Tokens>& references) {
    if (candidates.size() != references.size()) {
        throw std::invalid_argument("corpus_rouge: " + std::to_string(candidates.size()) +
                                    " candidates for " + std::to_string(references.size()) +
                                    " references");
    }
    std::vector<RougeTriple> per_doc(candidates.size());
    const auto n = static_cast<long>(candidates.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < n; ++i) {
        per_doc[static_cast<std::size_t>(i)] =
            rouge_all(candidates[static_cast<std::size_t>(i)], references[static_cast<std::size_t>(i)]);
    }
    RougeTriple avg;
    if (per_doc.empty()) return avg;
    auto acc = [](RougeScore& into, const RougeScore& s) {
        into.precision += s.precision;
        into.recall += s.recall;
        into.f1 += s.f1;
    };
    for (const auto& t : per_doc) {
        acc(avg.rouge1, t.rouge1);
        acc(avg.rouge2, t.rouge2);
        acc(avg.rougeL, t.rougeL);
    }
    const double inv = 1.0 / static_cast<double>(per_doc.size());
    for (auto* s : {&avg.rouge1, &avg.rouge2, &avg.rougeL}) {
        s->precision *= inv;
        s->recall *= inv;
        s->f1 *= inv;
    }
    return avg;
}

}  // namespace protosum
