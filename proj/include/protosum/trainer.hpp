#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "protosum/abstractor.hpp"
#include "protosum/extractor.hpp"
#include "protosum/labeler.hpp"

namespace protosum {

// Guide targets per summary step t (size T): the aligned source position l(t) and
// the gold-prototype slot k(t) holding that source position.
struct AttentionTargets {
    std::vector<std::optional<std::size_t>> source;
    std::vector<std::optional<std::size_t>> prototype;
};

AttentionTargets attention_targets(const LabeledExample& example, const Prototype& gold);

enum class ProtoGuide {
    kDecoder,  // alpha^P_{t,k(t)}: head 0 of the last prototype-reading decoder block
    kEncoder,  // row k(t), column l(t) of the prototype dual stack's head-0 weights
};

struct GenLossConfig {
    double lambda1 = 0.5;
    double lambda2 = 0.5;
    ProtoGuide proto_guide = ProtoGuide::kDecoder;
};

struct GenLossBreakdown {
    double main = 0.0;
    double attn_sum = 0.0;
    double attn_proto = 0.0;
    double total = 0.0;
    double lambda1 = 0.5;
    double lambda2 = 0.5;
};

// Un-normalized loss sums of one example plus the step counts they run over.
struct GenLossSums {
    Var nll;                        // -sum_t log p(y_t)
    std::size_t steps = 0;
    std::optional<Var> attn_sum;    // -sum over targeted steps of log alpha^C_{t,l(t)}
    std::size_t attn_sum_steps = 0;
    std::optional<Var> attn_proto;  // -sum over targeted steps of the prototype guide
    std::size_t attn_proto_steps = 0;
};

// `target_probs` is T' x 1 (T' = T + 1 with the <eos> step); attention matrices
// come from the decoder (and the encoder for ProtoGuide::kEncoder).
GenLossSums gen_loss_sums(Var target_probs, Var source_attention, Var prototype_attention,
                          std::optional<Var> encoder_prototype_attention,
                          const AttentionTargets& targets, ProtoGuide guide);

struct Normalizers {
    double steps = 1.0;
    double attn_sum_steps = 1.0;
    double attn_proto_steps = 1.0;
};

// main/steps + lambda1 * attn_sum/attn_sum_steps + lambda2 * attn_proto/attn_proto_steps.
// Empty guide sums contribute nothing.
Var combine_gen_loss(const GenLossSums& sums, const Normalizers& norm, const GenLossConfig& config,
                     GenLossBreakdown* breakdown = nullptr);

struct GenLossResult {
    Var total;
    GenLossBreakdown breakdown;
};

// Full per-example generation loss: joint encoding, teacher-forced decoding and the
// three loss terms, each averaged over its own step count.
GenLossResult gen_loss(Graph& g, const AbstractorModel& model, const LabeledExample& example,
                       const AttentionTargets& targets, const GenLossConfig& config);

// Sums of one example, ready for batch-level normalization.
GenLossSums example_loss_sums(Graph& g, const AbstractorModel& model,
                              const LabeledExample& example, const AttentionTargets& targets,
                              ProtoGuide guide);

struct AbstractorTrainConfig {
    TrainConfig train;
    GenLossConfig loss;
    std::size_t validate_every = 0;  // steps; 0 means once per epoch
};

struct AbstractorStepLog {
    std::size_t step = 0;
    double lr = 0.0;
    GenLossBreakdown loss;
};

struct AbstractorTrainResult {
    std::vector<AbstractorStepLog> steps;
    std::vector<std::pair<std::size_t, double>> validation;  // (step, mean total loss)
    double best_valid_loss = 0.0;
    std::size_t best_step = 0;
};

// Batch-normalized loss of a set of examples without gradients.
GenLossBreakdown abstractor_eval_loss(const AbstractorModel& model,
                                      const std::vector<LabeledExample>& examples,
                                      const GenLossConfig& config);

// Teacher-forced training on (source, gold prototype, summary) triples. Every
// example needs a gold prototype. Leaves `model` at the best validation loss.
AbstractorTrainResult train_abstractor(
    AbstractorModel& model, const std::vector<LabeledExample>& train,
    const std::vector<LabeledExample>& valid, const AbstractorTrainConfig& config,
    const std::function<void(const AbstractorStepLog&)>& on_step = {});

}  // namespace protosum
