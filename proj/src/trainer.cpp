#include "protosum/trainer.hpp"

#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "protosum/adam.hpp"
#include "protosum/batch.hpp"
#include "protosum/parallel.hpp"

namespace protosum {

AttentionTargets attention_targets(const LabeledExample& example, const Prototype& gold) {
    const auto t_len = example.doc.summary.size();
    AttentionTargets targets;
    targets.source.assign(t_len, std::nullopt);
    targets.prototype.assign(t_len, std::nullopt);
    std::unordered_map<std::size_t, std::size_t> slot_of;
    for (std::size_t k = 0; k < gold.positions.size(); ++k) slot_of.emplace(gold.positions[k], k);
    for (const auto& [t, l] : example.alignment) {
        if (t >= t_len) throw std::invalid_argument("attention_targets: alignment beyond summary");
        targets.source[t] = l;
        if (auto it = slot_of.find(l); it != slot_of.end()) targets.prototype[t] = it->second;
    }
    return targets;
}

GenLossSums gen_loss_sums(Var target_probs, Var source_attention, Var prototype_attention,
                          std::optional<Var> encoder_prototype_attention,
                          const AttentionTargets& targets, ProtoGuide guide) {
    GenLossSums sums;
    sums.nll = scale(sum(log(target_probs, kProbabilityFloor)), -1.0);
    sums.steps = target_probs.rows();

    std::vector<std::pair<std::size_t, std::size_t>> source_cells, proto_cells;
    for (std::size_t t = 0; t < targets.source.size(); ++t) {
        if (targets.source[t]) source_cells.emplace_back(t, *targets.source[t]);
        if (targets.prototype[t]) {
            if (guide == ProtoGuide::kDecoder) {
                proto_cells.emplace_back(t, *targets.prototype[t]);
            } else {
                if (!targets.source[t]) continue;
                proto_cells.emplace_back(*targets.prototype[t], *targets.source[t]);
            }
        }
    }
    if (!source_cells.empty()) {
        sums.attn_sum = scale(sum(log(gather(source_attention, source_cells), kProbabilityFloor)), -1.0);
        sums.attn_sum_steps = source_cells.size();
    }
    if (!proto_cells.empty()) {
        Var weights = prototype_attention;
        if (guide == ProtoGuide::kEncoder) {
            if (!encoder_prototype_attention) {
                throw std::invalid_argument("gen_loss: encoder guide needs encoder attention");
            }
            weights = *encoder_prototype_attention;
        }
        sums.attn_proto = scale(sum(log(gather(weights, proto_cells), kProbabilityFloor)), -1.0);
        sums.attn_proto_steps = proto_cells.size();
    }
    return sums;
}

Var combine_gen_loss(const GenLossSums& sums, const Normalizers& norm, const GenLossConfig& config,
                     GenLossBreakdown* breakdown) {
    Var total = scale(sums.nll, 1.0 / norm.steps);
    GenLossBreakdown b;
    b.lambda1 = config.lambda1;
    b.lambda2 = config.lambda2;
    b.main = total.scalar();
    if (sums.attn_sum) {
        Var term = scale(*sums.attn_sum, 1.0 / norm.attn_sum_steps);
        b.attn_sum = term.scalar();
        if (config.lambda1 != 0.0) total = add(total, scale(term, config.lambda1));
    }
    if (sums.attn_proto) {
        Var term = scale(*sums.attn_proto, 1.0 / norm.attn_proto_steps);
        b.attn_proto = term.scalar();
        if (config.lambda2 != 0.0) total = add(total, scale(term, config.lambda2));
    }
    b.total = total.scalar();
    if (breakdown != nullptr) *breakdown = b;
    return total;
}

GenLossSums example_loss_sums(Graph& g, const AbstractorModel& model,
                              const LabeledExample& example, const AttentionTargets& targets,
                              ProtoGuide guide) {
    if (!example.gold_prototype) {
        throw std::invalid_argument("no gold prototype for " + example.doc.id +
                                    "; run gen-prototypes first");
    }
    const auto encoded = model.joint_encode(g, example.doc.flat(), example.gold_prototype->tokens);
    Tokens inputs{kBosToken};
    inputs.insert(inputs.end(), example.doc.summary.begin(), example.doc.summary.end());
    Tokens outputs = example.doc.summary;
    outputs.push_back(kEosToken);
    const auto out = model.decode(g, encoded, inputs);
    Var probs = target_probabilities(g, model, encoded, out, outputs);
    return gen_loss_sums(probs, out.source_attention, out.prototype_attention,
                         encoded.prototype_to_source, targets, guide);
}

GenLossResult gen_loss(Graph& g, const AbstractorModel& model, const LabeledExample& example,
                       const AttentionTargets& targets, const GenLossConfig& config) {
    const auto sums = example_loss_sums(g, model, example, targets, config.proto_guide);
    Normalizers norm{static_cast<double>(sums.steps),
                     static_cast<double>(std::max<std::size_t>(sums.attn_sum_steps, 1)),
                     static_cast<double>(std::max<std::size_t>(sums.attn_proto_steps, 1))};
    GenLossResult r;
    r.total = combine_gen_loss(sums, norm, config, &r.breakdown);
    return r;
}

namespace {

struct BatchPlan {
    std::vector<AttentionTargets> targets;
    Normalizers norm;
};

std::size_t guided_proto_steps(const AttentionTargets& t, ProtoGuide guide) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.prototype.size(); ++i) {
        if (t.prototype[i] && (guide == ProtoGuide::kDecoder || t.source[i])) ++n;
    }
    return n;
}

BatchPlan plan_batch(const std::vector<const LabeledExample*>& batch, ProtoGuide guide) {
    BatchPlan plan;
    std::size_t steps = 0, src = 0, proto = 0;
    for (const auto* ex : batch) {
        if (!ex->gold_prototype) {
            throw std::invalid_argument("no gold prototype for " + ex->doc.id +
                                        "; run gen-prototypes first");
        }
        plan.targets.push_back(attention_targets(*ex, *ex->gold_prototype));
        const auto& t = plan.targets.back();
        steps += ex->doc.summary.size() + 1;
        for (const auto& s : t.source) src += s ? 1 : 0;
        proto += guided_proto_steps(t, guide);
    }
    plan.norm = Normalizers{static_cast<double>(std::max<std::size_t>(steps, 1)),
                            static_cast<double>(std::max<std::size_t>(src, 1)),
                            static_cast<double>(std::max<std::size_t>(proto, 1))};
    return plan;
}

}  // namespace

GenLossBreakdown abstractor_eval_loss(const AbstractorModel& model,
                                      const std::vector<LabeledExample>& examples,
                                      const GenLossConfig& config) {
    std::vector<const LabeledExample*> all;
    for (const auto& ex : examples) all.push_back(&ex);
    const auto plan = plan_batch(all, config.proto_guide);
    std::vector<GenLossBreakdown> parts(examples.size());
    parallel_for(examples.size(), [&](std::size_t i) {
        Graph g(&model.params(), false);
        const auto sums = example_loss_sums(g, model, examples[i], plan.targets[i], config.proto_guide);
        combine_gen_loss(sums, plan.norm, config, &parts[i]);
    });
    GenLossBreakdown total;
    total.lambda1 = config.lambda1;
    total.lambda2 = config.lambda2;
    for (const auto& p : parts) {
        total.main += p.main;
        total.attn_sum += p.attn_sum;
        total.attn_proto += p.attn_proto;
        total.total += p.total;
    }
    return total;
}

AbstractorTrainResult train_abstractor(
    AbstractorModel& model, const std::vector<LabeledExample>& train,
    const std::vector<LabeledExample>& valid, const AbstractorTrainConfig& config,
    const std::function<void(const AbstractorStepLog&)>& on_step) {
    if (train.empty()) throw std::invalid_argument("train_abstractor: empty training set");
    for (const auto* set : {&train, &valid}) {
        for (const auto& ex : *set) {
            if (!ex.gold_prototype) {
                throw std::invalid_argument("no gold prototype for " + ex.doc.id +
                                            "; run gen-prototypes first");
            }
        }
    }
    const auto& tc = config.train;
    AdamConfig adam_config;
    adam_config.warmup_steps = tc.warmup_steps;
    adam_config.model_dim = model.config().d_model;
    adam_config.lr_factor = tc.lr_factor;
    Adam adam(model.params(), adam_config);
    Rng rng(tc.seed);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    AbstractorTrainResult result;
    std::vector<Matrix> best;
    const auto& eval_set = valid.empty() ? train : valid;
    const std::size_t steps_per_epoch = (train.size() + tc.batch_size - 1) / tc.batch_size;
    const std::size_t validate_every =
        config.validate_every > 0 ? config.validate_every : steps_per_epoch;

    auto validate = [&] {
        const double loss = abstractor_eval_loss(model, eval_set, config.loss).total;
        result.validation.emplace_back(adam.steps(), loss);
        if (best.empty() || loss < result.best_valid_loss) {
            result.best_valid_loss = loss;
            result.best_step = adam.steps();
            best.clear();
            for (const auto& p : model.params()) best.push_back(p.value);
        }
    };

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const auto count = std::min(tc.batch_size, order.size() - start);
            std::vector<const LabeledExample*> batch;
            for (std::size_t i = 0; i < count; ++i) batch.push_back(&train[order[start + i]]);
            const auto plan = plan_batch(batch, config.loss.proto_guide);
            std::vector<GenLossBreakdown> parts(count);
            auto grads = batch_gradients(model.params(), count, [&](Graph& g, std::size_t i) {
                const auto sums = example_loss_sums(g, model, *batch[i], plan.targets[i],
                                                    config.loss.proto_guide);
                return combine_gen_loss(sums, plan.norm, config.loss, &parts[i]);
            });
            if (!grads.finite) {
                throw std::runtime_error("abstractor training: non-finite loss or gradient at step " +
                                         std::to_string(adam.steps() + 1));
            }
            AbstractorStepLog log;
            log.lr = adam.step(model.params(), grads.grads);
            log.step = adam.steps();
            log.loss.lambda1 = config.loss.lambda1;
            log.loss.lambda2 = config.loss.lambda2;
            for (const auto& p : parts) {
                log.loss.main += p.main;
                log.loss.attn_sum += p.attn_sum;
                log.loss.attn_proto += p.attn_proto;
                log.loss.total += p.total;
            }
            result.steps.push_back(log);
            if (on_step) on_step(log);
            if (log.step % validate_every == 0) validate();
        }
    }
    if (result.validation.empty() || result.validation.back().first != adam.steps()) validate();
    for (std::size_t i = 0; i < best.size(); ++i) model.params().at(i).value = best[i];
    return result;
}

}  // namespace protosum
