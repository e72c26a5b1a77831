#include "protosum/labeler.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "protosum/parallel.hpp"
#include "protosum/rouge.hpp"

namespace protosum {

double oracle_objective(const Document& doc, const std::vector<std::size_t>& sentences) {
    std::vector<std::size_t> sorted = sentences;
    std::sort(sorted.begin(), sorted.end());
    Tokens selected;
    for (auto j : sorted) {
        selected.insert(selected.end(), doc.sentences.at(j).begin(), doc.sentences.at(j).end());
    }
    const double r1 = rouge_n(selected, doc.summary, 1).recall;
    const double r2 = rouge_n(selected, doc.summary, 2).recall;
    return 0.5 * (r1 + r2);
}

std::vector<std::size_t> select_oracle_sentences(const Document& doc) {
    std::vector<std::size_t> selected;
    std::vector<bool> used(doc.sentences.size(), false);
    double current = 0.0;
    while (selected.size() < doc.sentences.size()) {
        std::optional<std::size_t> best;
        double best_value = 0.0;
        for (std::size_t j = 0; j < doc.sentences.size(); ++j) {
            if (used[j]) continue;
            auto trial = selected;
            trial.push_back(j);
            const double value = oracle_objective(doc, trial);
            if (!best || value > best_value) {
                best = j;
                best_value = value;
            }
        }
        if (!selected.empty() && !(best_value > current)) break;
        selected.push_back(*best);
        used[*best] = true;
        current = best_value;
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

std::vector<std::pair<std::string, std::size_t>> oracle_words(
    const Document& doc, const std::vector<std::size_t>& sentences) {
    const auto offsets = doc.sentence_offsets();
    std::vector<std::size_t> sorted = sentences;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<std::string, std::size_t>> out;
    for (auto j : sorted) {
        const auto& s = doc.sentences.at(j);
        for (std::size_t i = 0; i < s.size(); ++i) out.emplace_back(s[i], offsets[j] + i);
    }
    return out;
}

Alignment align_lcs(const Tokens& summary,
                    const std::vector<std::pair<std::string, std::size_t>>& oracle) {
    const auto n = summary.size(), m = oracle.size();
    // suffix[i][j] = LCS of summary[i:] and oracle[j:]
    std::vector<std::size_t> suffix((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return suffix[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            at(i, j) = summary[i] == oracle[j].first ? at(i + 1, j + 1) + 1
                                                     : std::max(at(i + 1, j), at(i, j + 1));
        }
    }
    Alignment out;
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (summary[i] == oracle[j].first && at(i, j) == at(i + 1, j + 1) + 1) {
            out.emplace_back(i, oracle[j].second);
            ++i;
            ++j;
        } else if (at(i, j + 1) == at(i, j)) {
            ++j;
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<int> make_labels(const Document& doc, const std::vector<std::size_t>& oracle_sentences,
                             const Alignment& alignment) {
    const auto sentence_of = doc.sentence_of_position();
    std::vector<bool> in_oracle(doc.sentences.size(), false);
    for (auto j : oracle_sentences) in_oracle.at(j) = true;
    std::vector<int> labels(doc.length(), 0);
    for (const auto& [t, l] : alignment) {
        if (l >= labels.size() || !in_oracle[sentence_of[l]]) {
            throw std::logic_error("alignment position " + std::to_string(l) +
                                   " lies outside the oracle sentences of " + doc.id);
        }
        labels[l] = 1;
    }
    return labels;
}

std::size_t bin_length(std::size_t summary_length) {
    if (summary_length == 0) throw std::invalid_argument("bin_length: T must be >= 1");
    return std::max<std::size_t>(5, (summary_length + 2) / 5 * 5);
}

Prototype make_gold_prototype(const Document& doc,
                              const std::vector<std::size_t>& oracle_sentences,
                              const ImportanceScores& scores, std::size_t k) {
    std::vector<std::size_t> candidates;
    for (const auto& [word, pos] : oracle_words(doc, oracle_sentences)) candidates.push_back(pos);
    return make_prototype(doc, top_k_positions(scores.weighted, candidates, k));
}

LabeledExample label_document(const Document& doc) {
    LabeledExample ex;
    ex.doc = doc;
    ex.oracle_sentences = select_oracle_sentences(doc);
    ex.alignment = align_lcs(doc.summary, oracle_words(doc, ex.oracle_sentences));
    ex.labels = make_labels(doc, ex.oracle_sentences, ex.alignment);
    ex.k = bin_length(doc.summary.size());
    return ex;
}

std::vector<LabeledExample> label_corpus(const std::vector<Document>& corpus) {
    std::vector<LabeledExample> out(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { out[i] = label_document(corpus[i]); });
    return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabeledExample>& examples) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write labels " + path.string());
    for (const auto& ex : examples) {
        nlohmann::json alignment = nlohmann::json::array();
        for (const auto& [t, l] : ex.alignment) alignment.push_back({t, l});
        nlohmann::json record = {
            {"id", ex.doc.id},
            {"oracle_sentences", ex.oracle_sentences},
            {"labels", ex.labels},
            {"alignment", alignment},
            {"K", ex.k},
            {"gold_prototype_positions",
             ex.gold_prototype ? ex.gold_prototype->positions : std::vector<std::size_t>{}},
        };
        out << record.dump() << '\n';
    }
}

std::vector<LabeledExample> read_labels(const std::filesystem::path& path,
                                        const std::vector<Document>& corpus) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labels " + path.string());
    std::unordered_map<std::string, const Document*> by_id;
    for (const auto& d : corpus) by_id.emplace(d.id, &d);
    std::vector<LabeledExample> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        const auto where = " at line " + std::to_string(line) + " of " + path.string();
        nlohmann::json r;
        try {
            r = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            throw std::runtime_error("malformed record" + where);
        }
        for (const char* field :
             {"id", "oracle_sentences", "labels", "alignment", "K", "gold_prototype_positions"}) {
            if (!r.contains(field)) throw std::runtime_error(std::string("missing field: ") + field + where);
        }
        auto it = by_id.find(r["id"].get<std::string>());
        if (it == by_id.end()) throw std::runtime_error("unknown document id" + where);
        LabeledExample ex;
        ex.doc = *it->second;
        ex.oracle_sentences = r["oracle_sentences"].get<std::vector<std::size_t>>();
        ex.labels = r["labels"].get<std::vector<int>>();
        for (const auto& pair : r["alignment"]) {
            ex.alignment.emplace_back(pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>());
        }
        ex.k = r["K"].get<std::size_t>();
        if (ex.labels.size() != ex.doc.length()) {
            throw std::runtime_error("label count does not match document length" + where);
        }
        auto positions = r["gold_prototype_positions"].get<std::vector<std::size_t>>();
        if (!positions.empty()) ex.gold_prototype = make_prototype(ex.doc, std::move(positions));
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace protosum
