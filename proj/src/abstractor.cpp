#include "protosum/abstractor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "protosum/checkpoint.hpp"

namespace protosum {

nlohmann::json to_json(const AbstractorConfig& c) {
    return {{"n_blocks", c.n_blocks},   {"n_heads", c.n_heads},
            {"d_word", c.d_word},       {"d_model", c.d_model},
            {"ffn_width", c.ffn_width}, {"max_decode_len", c.max_decode_len},
            {"max_source_len", c.max_source_len}};
}

AbstractorConfig abstractor_config_from_json(const nlohmann::json& j) {
    AbstractorConfig c;
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.d_word = j.value("d_word", c.d_word);
    c.d_model = j.value("d_model", c.d_model);
    c.ffn_width = j.value("ffn_width", c.ffn_width);
    c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
    c.max_source_len = j.value("max_source_len", c.max_source_len);
    return c;
}

AbstractorModel::AbstractorModel(AbstractorConfig config, Vocabularies vocabs, std::uint64_t seed)
    : config_(config), vocabs_(std::move(vocabs)) {
    Rng rng(seed);
    const auto d = config_.d_model;
    const auto h = config_.n_heads;
    const auto f = config_.ffn_width;
    word_embedding_ =
        params_.add("embed.words", uniform_matrix(vocabs_.input.size(), config_.d_word, 1.0, rng));
    embed_projection_ = Linear::create(params_, "embed.project", config_.d_word, d, rng);
    auto blocks = [&](auto& into, const std::string& name, auto factory) {
        for (std::size_t b = 0; b < config_.n_blocks; ++b) {
            into.push_back(factory(params_, name + std::to_string(b), d, h, f, rng));
        }
    };
    blocks(source_encoder_, "encoder.source", EncoderBlock::create);
    blocks(prototype_encoder_, "encoder.prototype", EncoderBlock::create);
    blocks(source_dual_, "dual.source", CrossBlock::create);
    blocks(prototype_dual_, "dual.prototype", CrossBlock::create);
    blocks(decoder_prototype_, "decoder.prototype", CrossBlock::create);
    blocks(decoder_source_, "decoder.source", CrossBlock::create);
    mixture_head_ = Linear::create(params_, "head.mixture", 3 * d, 3, rng);
    generation_head_ = Linear::create(params_, "head.generate", d, vocabs_.output.size(), rng);
    positions_ = positional_encoding(std::max(config_.max_source_len, config_.max_decode_len + 1), d);
}

Var AbstractorModel::embed(Graph& g, const Tokens& tokens) const {
    if (tokens.size() > positions_.rows()) {
        throw std::invalid_argument("embed: sequence of " + std::to_string(tokens.size()) +
                                    " tokens exceeds the position table");
    }
    Var words = embedding(g.param(word_embedding_), vocabs_.input.encode(tokens));
    Matrix pe(tokens.size(), config_.d_model);
    std::copy_n(positions_.data(), pe.size(), pe.data());
    return add(relu(embed_projection_(g, words)), g.constant(std::move(pe)));
}

EncodedPair AbstractorModel::joint_encode(Graph& g, const Tokens& source,
                                          const Tokens& prototype) const {
    if (source.empty()) throw std::invalid_argument("joint_encode: empty source");
    if (prototype.empty()) throw std::invalid_argument("joint_encode: empty prototype");
    if (source.size() > config_.max_source_len) {
        throw std::invalid_argument("joint_encode: source longer than max_source_len");
    }
    EncodedPair enc;
    enc.source = source;
    enc.prototype = prototype;
    Var c = embed(g, source);
    for (const auto& b : source_encoder_) c = b(g, c).output;
    Var p = embed(g, prototype);
    for (const auto& b : prototype_encoder_) p = b(g, p).output;
    enc.source_encoded = c;
    enc.prototype_encoded = p;

    Var mc = c;
    for (const auto& b : source_dual_) mc = b(g, mc, p).output;
    Var mp = p;
    for (const auto& b : prototype_dual_) {
        auto out = b(g, mp, c);
        mp = out.output;
        enc.prototype_to_source = out.head0();
    }
    enc.source_states = mc;
    enc.prototype_states = mp;
    return enc;
}

DecoderOutput AbstractorModel::decode(Graph& g, const EncodedPair& encoded,
                                      const Tokens& inputs) const {
    if (inputs.empty() || inputs.front() != kBosToken) {
        throw std::invalid_argument("decode: input must start with <bos>");
    }
    if (inputs.size() > config_.max_decode_len) {
        throw std::invalid_argument("decode: prefix of " + std::to_string(inputs.size()) +
                                    " tokens exceeds max_decode_len " +
                                    std::to_string(config_.max_decode_len));
    }
    const Matrix mask = causal_mask(inputs.size());
    DecoderOutput out;
    Var x = embed(g, inputs);
    for (const auto& b : decoder_prototype_) {
        auto r = b(g, x, encoded.prototype_states, &mask);
        x = r.output;
        out.prototype_attention = r.head0();
    }
    for (const auto& b : decoder_source_) {
        auto r = b(g, x, encoded.source_states, &mask);
        x = r.output;
        out.source_attention = r.head0();
    }
    out.states = x;
    Var source_context = matmul(out.source_attention, encoded.source_states);
    Var prototype_context = matmul(out.prototype_attention, encoded.prototype_states);
    out.mixture = softmax_rows(mixture_head_(g, concat_cols({x, source_context, prototype_context})));
    out.vocab_probs = softmax_rows(generation_head_(g, x));
    return out;
}

void AbstractorModel::save(const std::filesystem::path& dir, nlohmann::json metadata) const {
    metadata["kind"] = "abstractor";
    metadata["config"] = to_json(config_);
    metadata["input_vocab"] = vocabs_.input.tokens();
    metadata["output_vocab"] = vocabs_.output.tokens();
    save_checkpoint(dir, params_, metadata);
}

std::pair<AbstractorModel, nlohmann::json> AbstractorModel::load(const std::filesystem::path& dir) {
    const auto meta = read_checkpoint_metadata(dir);
    if (meta.value("kind", "") != "abstractor") {
        throw std::runtime_error(dir.string() + " is not an abstractor checkpoint");
    }
    Vocabularies vocabs{
        Vocabulary::from_tokens(meta.at("input_vocab").get<std::vector<std::string>>()),
        Vocabulary::from_tokens(meta.at("output_vocab").get<std::vector<std::string>>())};
    AbstractorModel model(abstractor_config_from_json(meta.at("config")), std::move(vocabs), 0);
    auto stored = load_checkpoint(dir, model.params_);
    return {std::move(model), std::move(stored)};
}

// -- ExtendedVocab ----------------------------------------------------------------------

ExtendedVocab::ExtendedVocab(const Vocabulary& output, const Tokens& source,
                             const Tokens& prototype)
    : output_(&output) {
    auto assign = [&](const std::string& tok) {
        if (output.contains(tok)) return output.id(tok);
        auto [it, inserted] =
            extra_index_.emplace(tok, static_cast<int>(output.size() + extra_.size()));
        if (inserted) extra_.push_back(tok);
        return it->second;
    };
    for (const auto& t : source) source_ids_.push_back(assign(t));
    for (const auto& t : prototype) prototype_ids_.push_back(assign(t));
}

std::optional<int> ExtendedVocab::id(const std::string& token) const {
    if (output_->contains(token)) return output_->id(token);
    if (auto it = extra_index_.find(token); it != extra_index_.end()) return it->second;
    return std::nullopt;
}

const std::string& ExtendedVocab::token(int id) const {
    const auto i = static_cast<std::size_t>(id);
    return i < output_->size() ? output_->token(id) : extra_.at(i - output_->size());
}

// -- step distributions ---------------------------------------------------------------------

StepOutput step_output(const DecoderOutput& out, std::size_t t, const ExtendedVocab& ext) {
    const auto& pg = out.vocab_probs.value();
    const auto& ac = out.source_attention.value();
    const auto& ap = out.prototype_attention.value();
    const auto& lam = out.mixture.value();
    const auto& ms = out.states.value();
    StepOutput s;
    s.mixture = {lam(t, 0), lam(t, 1), lam(t, 2)};
    s.source_attention.assign(ac.row_span(t).begin(), ac.row_span(t).end());
    s.prototype_attention.assign(ap.row_span(t).begin(), ap.row_span(t).end());
    s.state.assign(ms.row_span(t).begin(), ms.row_span(t).end());
    s.p.assign(ext.size(), 0.0);
    for (std::size_t v = 0; v < pg.cols(); ++v) s.p[v] = s.mixture[0] * pg(t, v);
    std::vector<double> copy_c(ext.size(), 0.0), copy_p(ext.size(), 0.0);
    for (std::size_t l = 0; l < ac.cols(); ++l) copy_c[ext.source_ids()[l]] += ac(t, l);
    for (std::size_t k = 0; k < ap.cols(); ++k) copy_p[ext.prototype_ids()[k]] += ap(t, k);
    for (std::size_t v = 0; v < ext.size(); ++v) {
        s.p[v] = s.p[v] + s.mixture[1] * copy_c[v] + s.mixture[2] * copy_p[v];
    }
    return s;
}

StepOutput decode_step(const AbstractorModel& model, const EncodedPair& encoded,
                       const Tokens& prefix, const ExtendedVocab& ext) {
    Graph& g = *encoded.source_states.graph();
    const auto out = model.decode(g, encoded, prefix);
    return step_output(out, prefix.size() - 1, ext);
}

Var target_probabilities(Graph& g, const AbstractorModel& model, const EncodedPair& encoded,
                         const DecoderOutput& out, const Tokens& targets) {
    (void)g;
    const auto steps = out.states.rows();
    if (targets.size() != steps) {
        throw std::invalid_argument("target_probabilities: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(steps) + " decoder steps");
    }
    const auto& vocab = model.vocabs().output;
    std::vector<std::vector<std::size_t>> gen(steps), src(steps), proto(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto& y = targets[t];
        if (vocab.contains(y)) gen[t].push_back(static_cast<std::size_t>(vocab.id(y)));
        for (std::size_t l = 0; l < encoded.source.size(); ++l) {
            if (encoded.source[l] == y) src[t].push_back(l);
        }
        for (std::size_t k = 0; k < encoded.prototype.size(); ++k) {
            if (encoded.prototype[k] == y) proto[t].push_back(k);
        }
    }
    Var lam_g = slice_cols(out.mixture, 0, 1);
    Var lam_c = slice_cols(out.mixture, 1, 1);
    Var lam_p = slice_cols(out.mixture, 2, 1);
    Var p = hadamard(lam_g, gather_sum(out.vocab_probs, gen));
    p = add(p, hadamard(lam_c, gather_sum(out.source_attention, src)));
    p = add(p, hadamard(lam_p, gather_sum(out.prototype_attention, proto)));
    return p;
}

SequenceScore sequence_logprob(const AbstractorModel& model, const EncodedPair& encoded,
                               const Tokens& targets, bool keep_steps) {
    if (targets.empty() || targets.back() != kEosToken) {
        throw std::invalid_argument("sequence_logprob: targets must end with <eos>");
    }
    Graph& g = *encoded.source_states.graph();
    Tokens inputs{kBosToken};
    inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
    const auto out = model.decode(g, encoded, inputs);
    const auto before = g.floor_hits();
    Var logp = log(target_probabilities(g, model, encoded, out, targets), kProbabilityFloor);
    SequenceScore score;
    for (double v : logp.value().values()) score.logprob += v;
    score.floored_steps = g.floor_hits() - before;
    if (keep_steps) {
        const ExtendedVocab ext(model.vocabs().output, encoded.source, encoded.prototype);
        for (std::size_t t = 0; t < targets.size(); ++t) score.steps.push_back(step_output(out, t, ext));
    }
    return score;
}

}  // namespace protosum
