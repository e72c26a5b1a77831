#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "protosum/autodiff.hpp"
#include "protosum/corpus.hpp"
#include "protosum/labeler.hpp"
#include "protosum/nn.hpp"
#include "protosum/prototype.hpp"

namespace protosum {

struct ExtractorConfig {
    std::size_t d_model = 64;
    std::size_t n_blocks = 2;
    std::size_t n_heads = 2;
    std::size_t ffn_width = 128;
    std::size_t max_source_len = 400;
};

nlohmann::json to_json(const ExtractorConfig& c);
ExtractorConfig extractor_config_from_json(const nlohmann::json& j);

// Word importance scorer: token embedding plus sinusoidal positions, a stack of
// self-attention encoder blocks, and a sigmoid head applied to every word state.
class ExtractorModel {
  public:
    ExtractorModel(ExtractorConfig config, Vocabulary vocab, std::uint64_t seed);

    // One logit per source word (L x 1).
    Var logits(Graph& g, const Document& doc) const;

    const ExtractorConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    void save(const std::filesystem::path& dir, nlohmann::json metadata = {}) const;
    static ExtractorModel load(const std::filesystem::path& dir);

  private:
    ExtractorConfig config_;
    Vocabulary vocab_;
    ParameterSet params_;
    ParamId embedding_;
    std::vector<EncoderBlock> blocks_;
    Linear head_;
    Matrix positions_;
};

// Sigmoid word scores, sentence means and weighted scores for one document.
ImportanceScores score_words(const ExtractorModel& model, const Document& doc);

// Top-k words of the whole source by weighted score, in source order.
Prototype extract_prototype(const Document& doc, const ImportanceScores& scores, std::size_t k);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 16;
    std::size_t warmup_steps = 400;
    double lr_factor = 1.0;
    std::uint64_t seed = 1;
};

struct ExtractorEpochLog {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double valid_f1 = 0.0;
};

struct ExtractorTrainResult {
    std::vector<ExtractorEpochLog> epochs;
    double best_valid_loss = 0.0;
    std::size_t best_epoch = 0;
};

// Mean word-level binary cross-entropy of a labeled example (graph-building).
Var extractor_loss(Graph& g, const ExtractorModel& model, const LabeledExample& example);

// Word-mean BCE over a set of examples, no gradients.
double extractor_eval_loss(const ExtractorModel& model, const std::vector<LabeledExample>& examples);

// F1 of (p_ext >= 0.5) against the word labels, pooled over all words.
double word_label_f1(const ExtractorModel& model, const std::vector<LabeledExample>& examples);

// Minimizes word-mean BCE with Adam and the warmup schedule. Leaves `model` at the
// parameters of the epoch with the lowest validation loss.
ExtractorTrainResult train_extractor(ExtractorModel& model, const std::vector<LabeledExample>& train,
                                     const std::vector<LabeledExample>& valid,
                                     const TrainConfig& config,
                                     const std::function<void(const ExtractorEpochLog&)>& on_epoch = {});

}  // namespace protosum
