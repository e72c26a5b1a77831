#include "protosum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include "protosum/nn.hpp"

namespace protosum {

std::size_t Document::length() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.size();
    return n;
}

Tokens Document::flat() const {
    Tokens out;
    out.reserve(length());
    for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
    return out;
}

std::vector<std::size_t> Document::sentence_of_position() const {
    std::vector<std::size_t> out;
    out.reserve(length());
    for (std::size_t j = 0; j < sentences.size(); ++j) out.insert(out.end(), sentences[j].size(), j);
    return out;
}

std::vector<std::size_t> Document::sentence_offsets() const {
    std::vector<std::size_t> out;
    std::size_t off = 0;
    for (const auto& s : sentences) {
        out.push_back(off);
        off += s.size();
    }
    return out;
}

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return out;
}

std::string join_tokens(const Tokens& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

Document truncate(const Document& doc, std::size_t budget, std::size_t summary_budget) {
    Document out;
    out.id = doc.id;
    std::size_t left = budget;
    for (const auto& s : doc.sentences) {
        if (left == 0) break;
        const auto take = std::min(left, s.size());
        out.sentences.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(take));
        left -= take;
    }
    const auto t = std::min(summary_budget, doc.summary.size());
    out.summary.assign(doc.summary.begin(), doc.summary.begin() + static_cast<std::ptrdiff_t>(t));
    return out;
}

// -- Vocabulary ---------------------------------------------------------------------

Vocabulary::Vocabulary() : id_to_token_{"<pad>", "<unk>", "<bos>", "<eos>"} {
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
        token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
    }
}

Vocabulary Vocabulary::from_counts(const std::unordered_map<std::string, std::size_t>& counts,
                                   std::size_t cap) {
    if (cap < kReserved) throw std::invalid_argument("vocabulary cap must be >= 4");
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, n] : ranked) {
        if (v.size() >= cap) break;
        if (v.token_to_id_.contains(tok)) continue;
        v.token_to_id_.emplace(tok, static_cast<int>(v.id_to_token_.size()));
        v.id_to_token_.push_back(tok);
    }
    return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
    Vocabulary v;
    if (id_to_token.size() < kReserved) {
        throw std::invalid_argument("vocabulary list shorter than the reserved block");
    }
    for (std::size_t i = 0; i < kReserved; ++i) {
        if (id_to_token[i] != v.id_to_token_[i]) {
            throw std::invalid_argument("vocabulary list does not start with reserved tokens");
        }
    }
    for (std::size_t i = kReserved; i < id_to_token.size(); ++i) {
        if (!v.token_to_id_.emplace(id_to_token[i], static_cast<int>(i)).second) {
            throw std::invalid_argument("duplicate vocabulary entry: " + id_to_token[i]);
        }
        v.id_to_token_.push_back(id_to_token[i]);
    }
    return v;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return token_to_id_.contains(token); }

const std::string& Vocabulary::token(int id) const {
    return id_to_token_.at(static_cast<std::size_t>(id));
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
}

Vocabularies build_vocab(const std::vector<Document>& corpus, std::size_t input_cap,
                         std::size_t output_cap) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& doc : corpus) {
        for (const auto& s : doc.sentences) {
            for (const auto& t : s) ++counts[t];
        }
        for (const auto& t : doc.summary) ++counts[t];
    }
    return Vocabularies{Vocabulary::from_counts(counts, input_cap),
                        Vocabulary::from_counts(counts, output_cap)};
}

// -- corpus files ---------------------------------------------------------------------

Document document_from_json(const nlohmann::json& record, std::size_t line) {
    const auto where = " at line " + std::to_string(line);
    if (!record.is_object()) throw std::runtime_error("malformed record" + where);
    for (const char* field : {"id", "sentences", "summary"}) {
        if (!record.contains(field)) {
            throw std::runtime_error(std::string("missing field: ") + field + where);
        }
    }
    const auto& id = record["id"];
    const auto& sentences = record["sentences"];
    const auto& summary = record["summary"];
    if (!id.is_string()) throw std::runtime_error("field id must be a string" + where);
    if (!sentences.is_array()) throw std::runtime_error("field sentences must be an array" + where);
    if (!summary.is_string()) throw std::runtime_error("field summary must be a string" + where);
    Document doc;
    doc.id = id.get<std::string>();
    for (const auto& s : sentences) {
        if (!s.is_string()) throw std::runtime_error("sentence must be a string" + where);
        auto tokens = tokenize(s.get<std::string>());
        if (tokens.empty()) throw std::runtime_error("empty sentence" + where);
        doc.sentences.push_back(std::move(tokens));
    }
    if (doc.sentences.empty()) throw std::runtime_error("document has no sentences" + where);
    doc.summary = tokenize(summary.get<std::string>());
    if (doc.summary.empty()) throw std::runtime_error("empty summary" + where);
    return doc;
}

nlohmann::json document_to_json(const Document& doc) {
    nlohmann::json sentences = nlohmann::json::array();
    for (const auto& s : doc.sentences) sentences.push_back(join_tokens(s));
    return {{"id", doc.id}, {"sentences", sentences}, {"summary", join_tokens(doc.summary)}};
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus " + path.string());
    std::vector<Document> corpus;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(),
                        [](unsigned char c) { return std::isspace(c) != 0; })) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            throw std::runtime_error("malformed record at line " + std::to_string(line));
        }
        corpus.push_back(document_from_json(record, line));
    }
    return corpus;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& corpus) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus " + path.string());
    for (const auto& doc : corpus) out << document_to_json(doc).dump() << '\n';
}

// -- synthetic corpus ---------------------------------------------------------------------

namespace {

constexpr std::size_t kTopics = 4;

std::string marker_token(std::size_t topic) { return "mark" + std::to_string(topic); }

std::string topic_word(std::size_t topic, std::size_t i) {
    return "t" + std::to_string(topic) + "w" + std::to_string(i);
}

}  // namespace

std::vector<SynthDocument> synth_corpus(std::uint64_t seed, std::size_t n_docs,
                                        const SynthParams& params) {
    if (params.vocab_size < 3 * kTopics || params.n_sentences < 2 || params.sentence_len < 3) {
        throw std::invalid_argument(
            "synth_corpus: need vocab_size >= 12, n_sentences >= 2, sentence_len >= 3");
    }
    if (!(params.salient_fraction > 0.0 && params.salient_fraction < 1.0)) {
        throw std::invalid_argument("synth_corpus: salient_fraction must lie in (0,1)");
    }
    const std::size_t words_per_topic = (params.vocab_size - kTopics) / kTopics;
    const std::size_t min_len = std::max<std::size_t>(2, params.sentence_len - 2);
    const std::size_t max_len = params.sentence_len + 2;

    Rng rng(seed);
    std::vector<SynthDocument> out;
    out.reserve(n_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        SynthDocument sd;
        sd.doc.id = "synth-" + std::to_string(seed) + "-" + std::to_string(d);
        const std::size_t topic = rng.below(kTopics);
        std::size_t n_salient = 0;
        do {
            sd.salient_sentences.assign(params.n_sentences, false);
            n_salient = 0;
            for (std::size_t j = 0; j < params.n_sentences; ++j) {
                if (rng.bernoulli(params.salient_fraction)) {
                    sd.salient_sentences[j] = true;
                    ++n_salient;
                }
            }
        } while (n_salient == 0 || n_salient == params.n_sentences);

        for (std::size_t j = 0; j < params.n_sentences; ++j) {
            const std::size_t len = min_len + rng.below(max_len - min_len + 1);
            Tokens sentence;
            if (sd.salient_sentences[j]) {
                sentence.push_back(marker_token(topic));
                sd.salient_words.push_back(0);
                for (std::size_t i = 1; i < len; ++i) {
                    sentence.push_back(topic_word(topic, rng.below(words_per_topic)));
                    sd.doc.summary.push_back(sentence.back());
                    sd.salient_words.push_back(1);
                }
            } else {
                const std::size_t other = (topic + 1 + rng.below(kTopics - 1)) % kTopics;
                for (std::size_t i = 0; i < len; ++i) {
                    sentence.push_back(topic_word(other, rng.below(words_per_topic)));
                    sd.salient_words.push_back(0);
                }
            }
            sd.doc.sentences.push_back(std::move(sentence));
        }
        out.push_back(std::move(sd));
    }
    return out;
}

std::vector<Document> documents_of(const std::vector<SynthDocument>& synth) {
    std::vector<Document> docs;
    docs.reserve(synth.size());
    for (const auto& s : synth) docs.push_back(s.doc);
    return docs;
}

}  // namespace protosum
