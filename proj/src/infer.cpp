#include "protosum/infer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "protosum/parallel.hpp"

namespace protosum {

namespace {

bool better(double lp_a, const std::vector<int>& a, double lp_b, const std::vector<int>& b) {
    if (lp_a != lp_b) return lp_a > lp_b;
    return a < b;
}

struct Candidate {
    std::size_t parent;
    int id;
    double logprob;
    std::vector<int> ids;
};

}  // namespace

std::vector<Hypothesis> beam_search(const AbstractorModel& model, const EncodedPair& encoded,
                                    std::size_t n_beam, std::size_t max_len) {
    if (n_beam == 0) throw std::invalid_argument("beam_search: N_beam must be >= 1");
    if (max_len == 0) throw std::invalid_argument("beam_search: max_len must be >= 1");
    max_len = std::min(max_len, model.config().max_decode_len);
    const auto& out_vocab = model.vocabs().output;
    const ExtendedVocab ext(out_vocab, encoded.source, encoded.prototype);
    const int eos = Vocabulary::kEos;
    Graph& g = *encoded.source_states.graph();
    const auto mark = g.node_count();

    std::vector<Hypothesis> active{Hypothesis{{kBosToken}, {}, 0.0, false}};
    std::vector<Hypothesis> finished;

    while (!active.empty()) {
        std::vector<Candidate> pool;
        for (std::size_t h = 0; h < active.size(); ++h) {
            const auto step = decode_step(model, encoded, active[h].tokens, ext);
            g.truncate(mark);
            std::vector<Candidate> local;
            for (std::size_t v = 0; v < step.p.size(); ++v) {
                const int id = static_cast<int>(v);
                if (id == Vocabulary::kPad || id == Vocabulary::kUnk || id == Vocabulary::kBos) continue;
                const double lp = active[h].logprob + std::log(std::max(step.p[v], kProbabilityFloor));
                auto ids = active[h].ids;
                ids.push_back(id);
                local.push_back(Candidate{h, id, lp, std::move(ids)});
            }
            const auto take = std::min(n_beam, local.size());
            std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(take),
                              local.end(), [](const Candidate& a, const Candidate& b) {
                                  return better(a.logprob, a.ids, b.logprob, b.ids);
                              });
            local.resize(take);
            for (auto& c : local) pool.push_back(std::move(c));
        }
        std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
            return better(a.logprob, a.ids, b.logprob, b.ids);
        });
        std::vector<Hypothesis> next;
        for (auto& c : pool) {
            if (next.size() == n_beam) break;
            Hypothesis hyp;
            hyp.tokens = active[c.parent].tokens;
            hyp.tokens.push_back(ext.token(c.id));
            hyp.ids = std::move(c.ids);
            hyp.logprob = c.logprob;
            hyp.finished = c.id == eos || hyp.ids.size() >= max_len;
            if (hyp.finished) {
                finished.push_back(std::move(hyp));
            } else {
                next.push_back(std::move(hyp));
            }
        }
        active = std::move(next);
        if (finished.size() >= n_beam) {
            std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
                return better(a.logprob, a.ids, b.logprob, b.ids);
            });
            finished.resize(n_beam);
            // Scores only decrease as hypotheses grow.
            const bool can_improve =
                std::any_of(active.begin(), active.end(), [&](const Hypothesis& h) {
                    return better(h.logprob, h.ids, finished.back().logprob, finished.back().ids);
                });
            if (!can_improve) break;
        }
    }
    std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
        return better(a.logprob, a.ids, b.logprob, b.ids);
    });
    if (finished.size() > n_beam) finished.resize(n_beam);
    return finished;
}

std::size_t repeated_trigrams(const Tokens& tokens) {
    if (tokens.size() < 3) return 0;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> seen;
    std::size_t repeats = 0;
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
        if (seen[{tokens[i], tokens[i + 1], tokens[i + 2]}]++ > 0) ++repeats;
    }
    return repeats;
}

Tokens summary_tokens(const Hypothesis& h) {
    Tokens t(h.tokens.begin() + (h.tokens.empty() ? 0 : 1), h.tokens.end());
    if (!t.empty() && t.back() == kEosToken) t.pop_back();
    return t;
}

const Hypothesis& rerank(const std::vector<Hypothesis>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("rerank: no candidates");
    std::size_t best = 0;
    std::size_t best_rep = repeated_trigrams(summary_tokens(candidates[0]));
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto rep = repeated_trigrams(summary_tokens(candidates[i]));
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        if (rep < best_rep || (rep == best_rep && better(c.logprob, c.ids, b.logprob, b.ids))) {
            best = i;
            best_rep = rep;
        }
    }
    return candidates[best];
}

SummaryResult summarize(const ExtractorModel& extractor, const AbstractorModel& abstractor,
                        const Document& doc, std::optional<std::size_t> k,
                        std::optional<std::size_t> standard_k, const InferConfig& config) {
    if (!k) {
        if (!standard_k) {
            throw std::invalid_argument(
                "no K given and the abstractor stores no standard K; pass --k or retrain "
                "the abstractor with a validation set to calibrate it");
        }
        k = standard_k;
    }
    if (*k == 0) throw std::invalid_argument("summarize: K must be >= 1");
    SummaryResult r;
    r.k = *k;
    r.prototype = extract_prototype(doc, score_words(extractor, doc), *k);
    Graph g(&abstractor.params(), false);
    const auto enc = abstractor.joint_encode(g, doc.flat(), r.prototype.tokens);
    const auto beams = beam_search(abstractor, enc, config.n_beam, 2 * *k + config.extra_len);
    const auto& best = rerank(beams);
    r.summary = summary_tokens(best);
    r.logprob = best.logprob;
    r.repeated = repeated_trigrams(r.summary);
    return r;
}

std::vector<SummaryResult> summarize_corpus(const ExtractorModel& extractor,
                                            const AbstractorModel& abstractor,
                                            const std::vector<Document>& docs,
                                            std::optional<std::size_t> k,
                                            std::optional<std::size_t> standard_k,
                                            const InferConfig& config) {
    std::vector<SummaryResult> out(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
        out[i] = summarize(extractor, abstractor, docs[i], k, standard_k, config);
    });
    return out;
}

}  // namespace protosum
