#include "protosum/extractor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "protosum/adam.hpp"
#include "protosum/batch.hpp"
#include "protosum/checkpoint.hpp"
#include "protosum/parallel.hpp"

namespace protosum {

nlohmann::json to_json(const ExtractorConfig& c) {
    return {{"d_model", c.d_model},
            {"n_blocks", c.n_blocks},
            {"n_heads", c.n_heads},
            {"ffn_width", c.ffn_width},
            {"max_source_len", c.max_source_len}};
}

ExtractorConfig extractor_config_from_json(const nlohmann::json& j) {
    ExtractorConfig c;
    c.d_model = j.value("d_model", c.d_model);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.ffn_width = j.value("ffn_width", c.ffn_width);
    c.max_source_len = j.value("max_source_len", c.max_source_len);
    return c;
}

ExtractorModel::ExtractorModel(ExtractorConfig config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
    Rng rng(seed);
    const auto d = config_.d_model;
    embedding_ = params_.add("extractor.embedding", uniform_matrix(vocab_.size(), d, 1.0, rng));
    for (std::size_t b = 0; b < config_.n_blocks; ++b) {
        blocks_.push_back(EncoderBlock::create(params_, "extractor.block" + std::to_string(b), d,
                                               config_.n_heads, config_.ffn_width, rng));
    }
    head_ = Linear::create(params_, "extractor.head", d, 1, rng);
    positions_ = positional_encoding(config_.max_source_len, d);
}

Var ExtractorModel::logits(Graph& g, const Document& doc) const {
    const auto flat = doc.flat();
    if (flat.empty()) throw std::invalid_argument("extractor: empty document " + doc.id);
    if (flat.size() > config_.max_source_len) {
        throw std::invalid_argument("extractor: document " + doc.id + " has " +
                                    std::to_string(flat.size()) + " words, budget is " +
                                    std::to_string(config_.max_source_len));
    }
    Matrix pe(flat.size(), config_.d_model);
    std::copy_n(positions_.data(), pe.size(), pe.data());
    Var x = add(embedding(g.param(embedding_), vocab_.encode(flat)), g.constant(std::move(pe)));
    for (const auto& block : blocks_) x = block(g, x).output;
    return head_(g, x);
}

void ExtractorModel::save(const std::filesystem::path& dir, nlohmann::json metadata) const {
    metadata["kind"] = "extractor";
    metadata["config"] = to_json(config_);
    metadata["vocab"] = vocab_.tokens();
    save_checkpoint(dir, params_, metadata);
}

ExtractorModel ExtractorModel::load(const std::filesystem::path& dir) {
    const auto meta = read_checkpoint_metadata(dir);
    if (meta.value("kind", "") != "extractor") {
        throw std::runtime_error(dir.string() + " is not an extractor checkpoint");
    }
    ExtractorModel model(extractor_config_from_json(meta.at("config")),
                         Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>()),
                         0);
    load_checkpoint(dir, model.params_);
    return model;
}

ImportanceScores score_words(const ExtractorModel& model, const Document& doc) {
    Graph g(&model.params(), false);
    const auto& p = sigmoid(model.logits(g, doc)).value();
    return weight_by_sentence(doc, std::vector<double>(p.values().begin(), p.values().end()));
}

Prototype extract_prototype(const Document& doc, const ImportanceScores& scores, std::size_t k) {
    if (k == 0) throw std::invalid_argument("extract_prototype: K must be >= 1");
    std::vector<std::size_t> all(doc.length());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return make_prototype(doc, top_k_positions(scores.weighted, all, k));
}

namespace {

Matrix label_column(const LabeledExample& ex) {
    Matrix m(ex.labels.size(), 1);
    for (std::size_t i = 0; i < ex.labels.size(); ++i) m[i] = ex.labels[i];
    return m;
}

}  // namespace

Var extractor_loss(Graph& g, const ExtractorModel& model, const LabeledExample& example) {
    if (example.labels.size() != example.doc.length()) {
        throw std::invalid_argument("extractor_loss: labels missing for " + example.doc.id);
    }
    return bce_with_logits(model.logits(g, example.doc), label_column(example));
}

double extractor_eval_loss(const ExtractorModel& model, const std::vector<LabeledExample>& examples) {
    std::vector<double> sums(examples.size());
    std::vector<std::size_t> counts(examples.size());
    parallel_for(examples.size(), [&](std::size_t i) {
        Graph g(&model.params(), false);
        counts[i] = examples[i].labels.size();
        sums[i] = extractor_loss(g, model, examples[i]).scalar() * static_cast<double>(counts[i]);
    });
    double total = 0.0;
    std::size_t words = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        total += sums[i];
        words += counts[i];
    }
    return words == 0 ? 0.0 : total / static_cast<double>(words);
}

double word_label_f1(const ExtractorModel& model, const std::vector<LabeledExample>& examples) {
    std::vector<std::array<std::size_t, 3>> per_doc(examples.size());
    parallel_for(examples.size(), [&](std::size_t i) {
        const auto scores = score_words(model, examples[i].doc);
        std::array<std::size_t, 3> c{0, 0, 0};  // tp, fp, fn
        for (std::size_t l = 0; l < scores.word.size(); ++l) {
            const bool pred = scores.word[l] >= 0.5;
            const bool gold = examples[i].labels[l] == 1;
            if (pred && gold) ++c[0];
            if (pred && !gold) ++c[1];
            if (!pred && gold) ++c[2];
        }
        per_doc[i] = c;
    });
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& c : per_doc) {
        tp += c[0];
        fp += c[1];
        fn += c[2];
    }
    if (tp == 0) return 0.0;
    const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * p * r / (p + r);
}

ExtractorTrainResult train_extractor(ExtractorModel& model, const std::vector<LabeledExample>& train,
                                     const std::vector<LabeledExample>& valid,
                                     const TrainConfig& config,
                                     const std::function<void(const ExtractorEpochLog&)>& on_epoch) {
    if (train.empty()) throw std::invalid_argument("train_extractor: empty training set");
    for (const auto& ex : train) {
        if (ex.labels.size() != ex.doc.length()) {
            throw std::invalid_argument("train_extractor: labels missing for " + ex.doc.id);
        }
    }
    AdamConfig adam_config;
    adam_config.warmup_steps = config.warmup_steps;
    adam_config.model_dim = model.config().d_model;
    adam_config.lr_factor = config.lr_factor;
    Adam adam(model.params(), adam_config);
    Rng rng(config.seed);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ExtractorTrainResult result;
    std::vector<Matrix> best;
    const auto& eval_set = valid.empty() ? train : valid;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        double lr = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const auto count = std::min(config.batch_size, order.size() - start);
            std::size_t words = 0;
            for (std::size_t i = 0; i < count; ++i) words += train[order[start + i]].labels.size();
            auto batch = batch_gradients(model.params(), count, [&](Graph& g, std::size_t i) {
                const auto& ex = train[order[start + i]];
                return scale(extractor_loss(g, model, ex),
                             static_cast<double>(ex.labels.size()) / static_cast<double>(words));
            });
            if (!batch.finite) {
                throw std::runtime_error("extractor training: non-finite loss or gradient at step " +
                                         std::to_string(adam.steps() + 1));
            }
            lr = adam.step(model.params(), batch.grads);
            epoch_loss += batch.loss;
            ++batches;
        }
        ExtractorEpochLog log;
        log.epoch = epoch;
        log.step = adam.steps();
        log.lr = lr;
        log.train_loss = epoch_loss / static_cast<double>(batches);
        log.valid_loss = extractor_eval_loss(model, eval_set);
        log.valid_f1 = word_label_f1(model, eval_set);
        result.epochs.push_back(log);
        if (on_epoch) on_epoch(log);
        if (best.empty() || log.valid_loss < result.best_valid_loss) {
            result.best_valid_loss = log.valid_loss;
            result.best_epoch = epoch;
            best.clear();
            for (const auto& p : model.params()) best.push_back(p.value);
        }
    }
    for (std::size_t i = 0; i < best.size(); ++i) model.params().at(i).value = best[i];
    return result;
}

}  // namespace protosum
