#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "protosum/autodiff.hpp"
#include "protosum/corpus.hpp"
#include "protosum/nn.hpp"

namespace protosum {

struct AbstractorConfig {
    std::size_t n_blocks = 2;
    std::size_t n_heads = 2;
    std::size_t d_word = 64;
    std::size_t d_model = 64;
    std::size_t ffn_width = 128;
    std::size_t max_decode_len = 128;
    std::size_t max_source_len = 400;
};

nlohmann::json to_json(const AbstractorConfig& c);
AbstractorConfig abstractor_config_from_json(const nlohmann::json& j);

inline const std::string kBosToken = "<bos>";
inline const std::string kEosToken = "<eos>";

// Joint encoding of a source text and its prototype.
struct EncodedPair {
    Var source_encoded;       // E_s^C, L x d_model (independent source stack)
    Var prototype_encoded;    // E_s^P, K x d_model (independent prototype stack)
    Var source_states;        // M^C, L x d_model (dual stack reading E_s^P)
    Var prototype_states;     // M^P, K x d_model (dual stack reading E_s^C)
    Var prototype_to_source;  // head-0 weights of the prototype dual stack's last block, K x L
    Tokens source;
    Tokens prototype;
};

// Teacher-forced decoder pass over a BOS-prefixed input, one row per step.
struct DecoderOutput {
    Var states;               // M^S, T x d_model
    Var source_attention;     // alpha^C: head 0 of the last source-reading block, T x L
    Var prototype_attention;  // alpha^P: head 0 of the last prototype-reading block, T x K
    Var mixture;              // (lambda_g, lambda_c, lambda_p) per step, T x 3
    Var vocab_probs;          // p_g over the output vocabulary, T x V
};

class AbstractorModel {
  public:
    AbstractorModel(AbstractorConfig config, Vocabularies vocabs, std::uint64_t seed);

    // Embedding lookup, projection to d_model, ReLU, plus sinusoidal positions 0..n-1.
    Var embed(Graph& g, const Tokens& tokens) const;

    // Throws std::invalid_argument for an empty prototype or source.
    EncodedPair joint_encode(Graph& g, const Tokens& source, const Tokens& prototype) const;

    // `inputs` must start with <bos>; row t predicts the token after inputs[t].
    DecoderOutput decode(Graph& g, const EncodedPair& encoded, const Tokens& inputs) const;

    const AbstractorConfig& config() const { return config_; }
    const Vocabularies& vocabs() const { return vocabs_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    void save(const std::filesystem::path& dir, nlohmann::json metadata = {}) const;
    // Returns the model and the metadata stored with it.
    static std::pair<AbstractorModel, nlohmann::json> load(const std::filesystem::path& dir);

  private:
    AbstractorConfig config_;
    Vocabularies vocabs_;
    ParameterSet params_;
    ParamId word_embedding_;
    Linear embed_projection_;
    std::vector<EncoderBlock> source_encoder_;
    std::vector<EncoderBlock> prototype_encoder_;
    std::vector<CrossBlock> source_dual_;
    std::vector<CrossBlock> prototype_dual_;
    std::vector<CrossBlock> decoder_prototype_;  // first stack, reads M^P
    std::vector<CrossBlock> decoder_source_;     // second stack, reads M^C
    Linear mixture_head_;                        // 3*d_model -> 3
    Linear generation_head_;                     // d_model -> |output vocab|
    Matrix positions_;
};

// Output vocabulary extended with the source and prototype words it lacks.
// Ids below output.size() are output-vocabulary ids.
class ExtendedVocab {
  public:
    ExtendedVocab(const Vocabulary& output, const Tokens& source, const Tokens& prototype);

    std::size_t size() const { return output_->size() + extra_.size(); }
    std::optional<int> id(const std::string& token) const;
    const std::string& token(int id) const;

    // Extended id of every source / prototype position.
    const std::vector<int>& source_ids() const { return source_ids_; }
    const std::vector<int>& prototype_ids() const { return prototype_ids_; }

  private:
    const Vocabulary* output_;
    std::vector<std::string> extra_;
    std::unordered_map<std::string, int> extra_index_;
    std::vector<int> source_ids_;
    std::vector<int> prototype_ids_;
};

struct StepOutput {
    std::vector<double> p;                // final distribution over the extended vocabulary
    std::vector<double> source_attention;
    std::vector<double> prototype_attention;
    std::array<double, 3> mixture{};      // lambda_g, lambda_c, lambda_p
    std::vector<double> state;            // M^S_t
};

// Mixture p = lambda_g p_g + lambda_c p_c + lambda_p p_p at decoder row t.
StepOutput step_output(const DecoderOutput& out, std::size_t t, const ExtendedVocab& ext);

// Distribution for the token following `prefix` (which starts with <bos>).
// Throws std::invalid_argument when the prefix exceeds max_decode_len.
StepOutput decode_step(const AbstractorModel& model, const EncodedPair& encoded,
                       const Tokens& prefix, const ExtendedVocab& ext);

// p(y_t) for each target token as a T x 1 graph node. Tokens outside the output
// vocabulary receive only their copy mass.
Var target_probabilities(Graph& g, const AbstractorModel& model, const EncodedPair& encoded,
                         const DecoderOutput& out, const Tokens& targets);

struct SequenceScore {
    double logprob = 0.0;
    std::size_t floored_steps = 0;  // steps whose probability hit the 1e-12 floor
    std::vector<StepOutput> steps;
};

// Teacher-forced sum of log p(y_t | y_<t) with a 1e-12 probability floor.
// `targets` must end with <eos>.
SequenceScore sequence_logprob(const AbstractorModel& model, const EncodedPair& encoded,
                               const Tokens& targets, bool keep_steps = false);

inline constexpr double kProbabilityFloor = 1e-12;

}  // namespace protosum
