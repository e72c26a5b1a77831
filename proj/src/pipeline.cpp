#include "protosum/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "protosum/checkpoint.hpp"
#include "protosum/gradcheck.hpp"
#include "protosum/labeler.hpp"
#include "protosum/nn.hpp"
#include "protosum/parallel.hpp"

namespace fs = std::filesystem;

namespace protosum {

namespace {

nlohmann::json default_config() {
    return {
        {"seed", 1},
        {"paths", {{"out_dir", "run"}, {"data_dir", ""}}},
        {"synth",
         {{"n_docs", 2000},
          {"vocab_size", 60},
          {"n_sentences", 4},
          {"sentence_len", 10},
          {"salient_fraction", 0.5},
          {"valid_fraction", 0.1},
          {"test_fraction", 0.1}}},
        {"data", {{"input_vocab_cap", 50000}, {"output_vocab_cap", 50000}, {"max_summary_len", 120}}},
        {"extractor",
         {{"model", to_json(ExtractorConfig{})},
          {"train",
           {{"epochs", 4}, {"batch_size", 16}, {"warmup_steps", 200}, {"lr_factor", 1.0}}}}},
        {"abstractor",
         {{"model", to_json(AbstractorConfig{})},
          {"train",
           {{"epochs", 30},
            {"batch_size", 16},
            {"warmup_steps", 200},
            {"lr_factor", 0.5},
            {"validate_every", 0}}},
          {"loss", {{"lambda1", 0.5}, {"lambda2", 0.5}, {"proto_guide", "decoder"}}}}},
        {"infer", {{"n_beam", 5}, {"extra_len", 10}, {"k", nullptr}, {"k_policy", "standard"}}},
        {"sweep", {{"k_values", {5, 10, 15, 20}}}},
    };
}

TrainConfig train_config_from(const nlohmann::json& j, std::uint64_t seed) {
    TrainConfig t;
    t.epochs = j.at("epochs").get<std::size_t>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.warmup_steps = j.at("warmup_steps").get<std::size_t>();
    t.lr_factor = j.at("lr_factor").get<double>();
    t.seed = seed;
    if (t.batch_size == 0) throw ValidationFailure("config: batch_size must be >= 1");
    if (t.warmup_steps == 0) throw ValidationFailure("config: warmup_steps must be >= 1");
    return t;
}

std::string header_comment(const RunConfig& c) {
    return "# config_hash=" + c.hash + " seed=" + std::to_string(c.seed);
}

void stamp(nlohmann::json& record, const RunConfig& c) {
    record["config_hash"] = c.hash;
    record["seed"] = c.seed;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void require(const fs::path& path, const std::string& command) {
    if (!fs::exists(path)) {
        throw MissingDependency(path.string() + " not found; run `protosum " + command + "` first");
    }
}

void require_checkpoint(const fs::path& dir, const std::string& command) {
    if (!checkpoint_exists(dir)) {
        throw MissingDependency("no checkpoint at " + dir.string() + "; run `protosum " + command +
                                "` first");
    }
}

std::size_t summary_budget(const RunConfig& c) {
    return std::min(c.max_summary_len, c.abstractor.max_decode_len - 1);
}

std::size_t source_budget(const RunConfig& c) {
    return std::min(c.extractor.max_source_len, c.abstractor.max_source_len);
}

std::vector<Document> load_docs(const RunConfig& c, const fs::path& path) {
    std::vector<Document> docs;
    try {
        docs = read_corpus(path);
    } catch (const std::runtime_error& e) {
        throw ValidationFailure(e.what());
    }
    for (auto& d : docs) d = truncate(d, source_budget(c), summary_budget(c));
    return docs;
}

std::vector<Document> load_split(const RunConfig& c, const std::string& name) {
    const RunPaths paths(c);
    require(paths.split(name), "synth");
    return load_docs(c, paths.split(name));
}

std::vector<LabeledExample> load_labeled(const fs::path& path,
                                         const std::vector<Document>& docs,
                                         const std::string& command) {
    require(path, command);
    try {
        return read_labels(path, docs);
    } catch (const std::runtime_error& e) {
        throw ValidationFailure(e.what());
    }
}

void write_labels_stamped(const fs::path& path, const std::vector<LabeledExample>& examples,
                          const RunConfig& c) {
    write_labels(path, examples);
    // Re-emit with the run stamp appended to each record.
    std::ifstream in(path);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        auto r = nlohmann::json::parse(line);
        stamp(r, c);
        out << r.dump() << '\n';
    }
    in.close();
    write_text(path, out.str());
}

Vocabularies run_vocab(const RunConfig& c, const std::vector<Document>& train) {
    return build_vocab(train, c.input_vocab_cap, c.output_vocab_cap);
}

double mean_summary_length(const std::vector<Document>& docs) {
    if (docs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& d : docs) total += static_cast<double>(d.summary.size());
    return total / static_cast<double>(docs.size());
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig make_run_config(nlohmann::json config, const ConfigOverrides& overrides) {
    nlohmann::json merged = default_config();
    if (!config.is_null()) {
        if (!config.is_object()) throw ValidationFailure("config must be a JSON object");
        merged.merge_patch(config);
    }
    if (overrides.seed) merged["seed"] = *overrides.seed;
    if (overrides.k) merged["infer"]["k"] = *overrides.k;
    if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') {
        merged["paths"]["out_dir"] = env;
    }
    if (overrides.out_dir) merged["paths"]["out_dir"] = overrides.out_dir->string();

    RunConfig c;
    try {
        c.seed = merged.at("seed").get<std::uint64_t>();
        c.out_dir = merged.at("paths").at("out_dir").get<std::string>();
        const auto data_dir = merged["paths"].value("data_dir", std::string{});
        c.data_dir = data_dir.empty() ? c.out_dir / "data" : fs::path(data_dir);

        const auto& s = merged.at("synth");
        c.n_docs = s.at("n_docs").get<std::size_t>();
        c.synth.vocab_size = s.at("vocab_size").get<std::size_t>();
        c.synth.n_sentences = s.at("n_sentences").get<std::size_t>();
        c.synth.sentence_len = s.at("sentence_len").get<std::size_t>();
        c.synth.salient_fraction = s.at("salient_fraction").get<double>();
        c.valid_fraction = s.at("valid_fraction").get<double>();
        c.test_fraction = s.at("test_fraction").get<double>();

        const auto& d = merged.at("data");
        c.input_vocab_cap = d.at("input_vocab_cap").get<std::size_t>();
        c.output_vocab_cap = d.at("output_vocab_cap").get<std::size_t>();
        c.max_summary_len = d.at("max_summary_len").get<std::size_t>();

        c.extractor = extractor_config_from_json(merged.at("extractor").at("model"));
        c.extractor_train = train_config_from(merged["extractor"].at("train"), c.seed + 2);
        c.abstractor = abstractor_config_from_json(merged.at("abstractor").at("model"));
        const auto& at = merged["abstractor"].at("train");
        c.abstractor_train.train = train_config_from(at, c.seed + 4);
        c.abstractor_train.validate_every = at.at("validate_every").get<std::size_t>();
        const auto& loss = merged["abstractor"].at("loss");
        c.abstractor_train.loss.lambda1 = loss.at("lambda1").get<double>();
        c.abstractor_train.loss.lambda2 = loss.at("lambda2").get<double>();
        const auto guide = loss.at("proto_guide").get<std::string>();
        if (guide == "decoder") {
            c.abstractor_train.loss.proto_guide = ProtoGuide::kDecoder;
        } else if (guide == "encoder") {
            c.abstractor_train.loss.proto_guide = ProtoGuide::kEncoder;
        } else {
            throw ValidationFailure("config: proto_guide must be \"decoder\" or \"encoder\"");
        }

        const auto& inf = merged.at("infer");
        c.infer.n_beam = inf.at("n_beam").get<std::size_t>();
        c.infer.extra_len = inf.at("extra_len").get<std::size_t>();
        if (!inf.at("k").is_null()) c.k = inf["k"].get<std::size_t>();
        const auto policy = inf.at("k_policy").get<std::string>();
        if (policy != "standard" && policy != "reference") {
            throw ValidationFailure("config: infer.k_policy must be \"standard\" or \"reference\"");
        }
        c.k_from_reference = policy == "reference";
        c.sweep_k = merged.at("sweep").at("k_values").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationFailure(std::string("config: ") + e.what());
    }
    if (c.infer.n_beam == 0) throw ValidationFailure("config: n_beam must be >= 1");
    if (c.k && *c.k == 0) throw ValidationFailure("K must be >= 1");
    if (c.abstractor.max_decode_len < 2) throw ValidationFailure("config: max_decode_len must be >= 2");

    c.effective = merged;
    nlohmann::json hashed = merged;
    hashed.erase("paths");
    c.hash = fnv1a_hex(hashed.dump());
    return c;
}

RunConfig load_run_config(const std::optional<fs::path>& path, const ConfigOverrides& overrides) {
    nlohmann::json j;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw MissingDependency("config file " + path->string() + " not found");
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationFailure("config " + path->string() + ": " + e.what());
        }
    }
    return make_run_config(std::move(j), overrides);
}

RunPaths::RunPaths(const RunConfig& c)
    : data(c.data_dir),
      extractor(c.out_dir / "extractor"),
      extractor_log(c.out_dir / "extractor_log.csv"),
      scores(c.out_dir / "scores.jsonl"),
      abstractor(c.out_dir / "abstractor"),
      abstractor_log(c.out_dir / "abstractor_log.csv"),
      abstractor_valid_log(c.out_dir / "abstractor_valid.csv"),
      summaries(c.out_dir / "summaries.jsonl"),
      eval(c.out_dir / "eval.csv"),
      length_sweep(c.out_dir / "length_sweep.csv"),
      grad_check(c.out_dir / "grad_check.csv"),
      out(c.out_dir) {}

fs::path RunPaths::split(const std::string& name) const { return data / (name + ".jsonl"); }
fs::path RunPaths::labels(const std::string& name) const {
    return out / "labels" / (name + ".jsonl");
}
fs::path RunPaths::prototypes(const std::string& name) const {
    return out / "prototypes" / (name + ".jsonl");
}

// -- commands ----------------------------------------------------------------------------

std::string cmd_synth(const RunConfig& c) {
    const RunPaths paths(c);
    if (c.valid_fraction < 0 || c.test_fraction < 0 || c.valid_fraction + c.test_fraction >= 1.0) {
        throw ValidationFailure("config: valid_fraction + test_fraction must be below 1");
    }
    std::vector<SynthDocument> synth;
    try {
        synth = synth_corpus(c.seed, c.n_docs, c.synth);
    } catch (const std::invalid_argument& e) {
        throw ValidationFailure(e.what());
    }
    const auto n_valid = static_cast<std::size_t>(std::llround(c.valid_fraction * c.n_docs));
    const auto n_test = static_cast<std::size_t>(std::llround(c.test_fraction * c.n_docs));
    const auto n_train = c.n_docs - n_valid - n_test;
    const std::size_t bounds[] = {0, n_train, n_train + n_valid, c.n_docs};
    std::ostringstream report;
    for (std::size_t s = 0; s < kSplits.size(); ++s) {
        std::ostringstream out;
        for (std::size_t i = bounds[s]; i < bounds[s + 1]; ++i) {
            auto r = document_to_json(synth[i].doc);
            r["salient_words"] = synth[i].salient_words;
            stamp(r, c);
            out << r.dump() << '\n';
        }
        write_text(paths.split(kSplits[s]), out.str());
        report << kSplits[s] << ": " << bounds[s + 1] - bounds[s] << " documents -> "
               << paths.split(kSplits[s]).string() << '\n';
    }
    return report.str();
}

std::string cmd_label(const RunConfig& c) {
    const RunPaths paths(c);
    std::ostringstream report;
    for (const auto& name : kSplits) {
        const auto docs = load_split(c, name);
        std::vector<LabeledExample> labeled;
        try {
            labeled = label_corpus(docs);
        } catch (const std::logic_error& e) {
            throw ValidationFailure(e.what());
        }
        write_labels_stamped(paths.labels(name), labeled, c);
        std::size_t positives = 0, words = 0;
        for (const auto& ex : labeled) {
            positives += static_cast<std::size_t>(std::count(ex.labels.begin(), ex.labels.end(), 1));
            words += ex.labels.size();
        }
        report << name << ": " << labeled.size() << " documents, " << positives << "/" << words
               << " positive words\n";
    }
    return report.str();
}

std::string cmd_train_extractor(const RunConfig& c) {
    const RunPaths paths(c);
    const auto train_docs = load_split(c, "train");
    const auto valid_docs = load_split(c, "valid");
    const auto train = load_labeled(paths.labels("train"), train_docs, "label");
    const auto valid = load_labeled(paths.labels("valid"), valid_docs, "label");
    ExtractorModel model(c.extractor, run_vocab(c, train_docs).input, c.seed + 1);
    std::ostringstream log;
    log << header_comment(c) << "\nepoch,step,lr,train_loss,valid_loss,valid_f1\n";
    const auto result = train_extractor(model, train, valid, c.extractor_train,
                                        [&](const ExtractorEpochLog& e) {
                                            log << e.epoch << ',' << e.step << ',' << fmt(e.lr)
                                                << ',' << fmt(e.train_loss) << ','
                                                << fmt(e.valid_loss) << ',' << fmt(e.valid_f1)
                                                << '\n';
                                        });
    write_text(paths.extractor_log, log.str());
    const double f1 = word_label_f1(model, valid);
    model.save(paths.extractor, {{"seed", c.seed},
                                 {"config_hash", c.hash},
                                 {"best_epoch", result.best_epoch},
                                 {"valid_f1", f1}});
    std::ostringstream report;
    report << "extractor: best epoch " << result.best_epoch << ", valid loss "
           << fmt(result.best_valid_loss) << ", valid word F1 " << fmt(f1) << '\n';
    return report.str();
}

std::string cmd_gen_prototypes(const RunConfig& c) {
    const RunPaths paths(c);
    require_checkpoint(paths.extractor, "train-extractor");
    const auto model = ExtractorModel::load(paths.extractor);
    std::ostringstream scores_out;
    std::ostringstream report;
    for (const auto& name : kSplits) {
        const auto docs = load_split(c, name);
        auto labeled = load_labeled(paths.labels(name), docs, "label");
        std::vector<ImportanceScores> scores(labeled.size());
        parallel_for(labeled.size(), [&](std::size_t i) {
            scores[i] = score_words(model, labeled[i].doc);
            labeled[i].gold_prototype =
                make_gold_prototype(labeled[i].doc, labeled[i].oracle_sentences, scores[i], labeled[i].k);
        });
        for (std::size_t i = 0; i < labeled.size(); ++i) {
            nlohmann::json r = {{"id", labeled[i].doc.id},
                                {"split", name},
                                {"word", scores[i].word},
                                {"sentence", scores[i].sentence},
                                {"weighted", scores[i].weighted}};
            stamp(r, c);
            scores_out << r.dump() << '\n';
        }
        write_labels_stamped(paths.prototypes(name), labeled, c);
        report << name << ": " << labeled.size() << " gold prototypes\n";
    }
    write_text(paths.scores, scores_out.str());
    return report.str();
}

std::string cmd_train_abstractor(const RunConfig& c) {
    const RunPaths paths(c);
    const auto train_docs = load_split(c, "train");
    const auto valid_docs = load_split(c, "valid");
    const auto train = load_labeled(paths.prototypes("train"), train_docs, "gen-prototypes");
    const auto valid = load_labeled(paths.prototypes("valid"), valid_docs, "gen-prototypes");
    AbstractorModel model(c.abstractor, run_vocab(c, train_docs), c.seed + 3);
    std::ostringstream log;
    log << header_comment(c) << "\nstep,lr,main,attn_sum,attn_proto,total\n";
    const auto result = train_abstractor(model, train, valid, c.abstractor_train,
                                         [&](const AbstractorStepLog& s) {
                                             log << s.step << ',' << fmt(s.lr) << ','
                                                 << fmt(s.loss.main) << ',' << fmt(s.loss.attn_sum)
                                                 << ',' << fmt(s.loss.attn_proto) << ','
                                                 << fmt(s.loss.total) << '\n';
                                         });
    write_text(paths.abstractor_log, log.str());
    std::ostringstream vlog;
    vlog << header_comment(c) << "\nstep,valid_loss\n";
    for (const auto& [step, loss] : result.validation) vlog << step << ',' << fmt(loss) << '\n';
    write_text(paths.abstractor_valid_log, vlog.str());

    nlohmann::json meta = {{"seed", c.seed},
                           {"config_hash", c.hash},
                           {"best_step", result.best_step},
                           {"best_valid_loss", result.best_valid_loss}};
    if (!valid_docs.empty()) {
        const double mean_len = mean_summary_length(valid_docs);
        meta["valid_mean_summary_length"] = mean_len;
        meta["standard_k"] = bin_length(static_cast<std::size_t>(std::llround(mean_len)));
    }
    model.save(paths.abstractor, meta);
    std::ostringstream report;
    report << "abstractor: " << result.steps.size() << " steps, best step " << result.best_step
           << ", valid loss " << fmt(result.best_valid_loss) << '\n';
    return report.str();
}

namespace {

struct LoadedModels {
    ExtractorModel extractor;
    AbstractorModel abstractor;
    std::optional<std::size_t> standard_k;
};

LoadedModels load_models(const RunConfig& c) {
    const RunPaths paths(c);
    require_checkpoint(paths.extractor, "train-extractor");
    require_checkpoint(paths.abstractor, "train-abstractor");
    auto extractor = ExtractorModel::load(paths.extractor);
    auto [abstractor, meta] = AbstractorModel::load(paths.abstractor);
    std::optional<std::size_t> standard_k;
    if (meta.contains("standard_k")) standard_k = meta["standard_k"].get<std::size_t>();
    return {std::move(extractor), std::move(abstractor), standard_k};
}

}  // namespace

std::string cmd_summarize(const RunConfig& c, const std::optional<fs::path>& input) {
    const RunPaths paths(c);
    auto models = load_models(c);
    std::vector<Document> docs;
    if (input) {
        if (!fs::exists(*input)) throw MissingDependency("input " + input->string() + " not found");
        docs = load_docs(c, *input);
    } else {
        docs = load_split(c, "test");
    }
    if (!c.k && !c.k_from_reference && !models.standard_k) {
        throw ValidationFailure(
            "no K given and the abstractor stores no standard K; pass --k or retrain the "
            "abstractor with a validation split to calibrate it");
    }
    std::vector<SummaryResult> results;
    if (!c.k && c.k_from_reference) {
        results.resize(docs.size());
        parallel_for(docs.size(), [&](std::size_t i) {
            results[i] = summarize(models.extractor, models.abstractor, docs[i],
                                   bin_length(std::max<std::size_t>(docs[i].summary.size(), 1)),
                                   std::nullopt, c.infer);
        });
    } else {
        results = summarize_corpus(models.extractor, models.abstractor, docs, c.k,
                                   models.standard_k, c.infer);
    }
    std::ostringstream out;
    double total_len = 0.0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto& r = results[i];
        nlohmann::json rec = {{"id", docs[i].id},
                              {"K", r.k},
                              {"prototype", {{"tokens", r.prototype.tokens},
                                             {"positions", r.prototype.positions}}},
                              {"summary", join_tokens(r.summary)},
                              {"length", r.summary.size()},
                              {"logprob", r.logprob},
                              {"repeated_trigrams", r.repeated}};
        stamp(rec, c);
        out << rec.dump() << '\n';
        total_len += static_cast<double>(r.summary.size());
    }
    write_text(paths.summaries, out.str());
    std::ostringstream report;
    report << docs.size() << " summaries -> " << paths.summaries.string() << ", mean length "
           << fmt(docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size())) << '\n';
    return report.str();
}

std::string cmd_eval(const RunConfig& c, const std::optional<fs::path>& candidates_path) {
    const RunPaths paths(c);
    const auto refs = load_split(c, "test");
    const auto path = candidates_path.value_or(paths.summaries);
    if (!fs::exists(path)) {
        throw MissingDependency(path.string() + " not found; run `protosum summarize` first");
    }
    std::unordered_map<std::string, Tokens> by_id;
    {
        std::ifstream in(path);
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            nlohmann::json r;
            try {
                r = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                throw ValidationFailure("malformed record at line " + std::to_string(n) + " of " +
                                        path.string());
            }
            if (!r.contains("id") || !r.contains("summary") || !r["summary"].is_string()) {
                throw ValidationFailure("record at line " + std::to_string(n) +
                                        " needs string fields id and summary");
            }
            auto toks = tokenize(r["summary"].get<std::string>());
            if (toks.size() > summary_budget(c) && r.contains("sentences")) {
                toks.resize(summary_budget(c));
            }
            by_id[r["id"].get<std::string>()] = std::move(toks);
        }
    }
    std::vector<Tokens> cands, references;
    for (const auto& d : refs) {
        auto it = by_id.find(d.id);
        if (it == by_id.end()) throw ValidationFailure("no candidate for document " + d.id);
        cands.push_back(it->second);
        references.push_back(d.summary);
    }
    const auto score = corpus_rouge(cands, references);
    std::ostringstream csv;
    csv << header_comment(c) << "\nmetric,precision,recall,f1\n";
    auto row = [&](const char* name, const RougeScore& s) {
        csv << name << ',' << fmt(s.precision) << ',' << fmt(s.recall) << ',' << fmt(s.f1) << '\n';
    };
    row("rouge1", score.rouge1);
    row("rouge2", score.rouge2);
    row("rougeL", score.rougeL);
    write_text(paths.eval, csv.str());
    return csv.str();
}

std::vector<SweepRow> length_sweep(const ExtractorModel& extractor, const AbstractorModel& abstractor,
                                   const std::vector<Document>& docs,
                                   const std::vector<std::size_t>& k_values,
                                   const InferConfig& infer) {
    std::vector<Tokens> refs;
    for (const auto& d : docs) refs.push_back(d.summary);
    std::vector<SweepRow> rows;
    for (auto k : k_values) {
        const auto results = summarize_corpus(extractor, abstractor, docs, k, std::nullopt, infer);
        SweepRow row;
        row.k = k;
        std::vector<Tokens> cands;
        for (const auto& r : results) {
            cands.push_back(r.summary);
            row.lengths.push_back(r.summary.size());
        }
        row.rouge = corpus_rouge(cands, refs);
        if (!results.empty()) {
            const double n = static_cast<double>(results.size());
            double sum = 0.0;
            for (auto l : row.lengths) sum += static_cast<double>(l);
            row.len_mean = sum / n;
            double var = 0.0;
            for (auto l : row.lengths) var += (static_cast<double>(l) - row.len_mean) * (static_cast<double>(l) - row.len_mean);
            row.len_std = std::sqrt(var / n);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::string& header) {
    std::ostringstream csv;
    if (!header.empty()) csv << header << '\n';
    csv << "K,r1_p,r1_r,r1_f,r2_p,r2_r,r2_f,rl_p,rl_r,rl_f,len_mean,len_std\n";
    for (const auto& r : rows) {
        csv << r.k;
        for (const auto* s : {&r.rouge.rouge1, &r.rouge.rouge2, &r.rouge.rougeL}) {
            csv << ',' << fmt(s->precision) << ',' << fmt(s->recall) << ',' << fmt(s->f1);
        }
        csv << ',' << fmt(r.len_mean) << ',' << fmt(r.len_std) << '\n';
    }
    return csv.str();
}

std::string cmd_length_sweep(const RunConfig& c) {
    const RunPaths paths(c);
    auto models = load_models(c);
    const auto docs = load_split(c, "test");
    std::vector<std::size_t> ks = c.k ? std::vector<std::size_t>{*c.k} : c.sweep_k;
    for (auto k : ks) {
        if (k == 0) throw ValidationFailure("sweep K values must be >= 1");
    }
    const auto rows = length_sweep(models.extractor, models.abstractor, docs, ks, c.infer);
    const auto csv = format_sweep_csv(rows, header_comment(c));
    write_text(paths.length_sweep, csv);
    return csv;
}

// -- gradient checks ------------------------------------------------------------------------

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
    return m;
}

// Contract an output with fixed random weights so every coordinate matters.
Var contract(Graph& g, Var out, Rng& rng) {
    return sum(hadamard(out, g.constant(random_matrix(out.rows(), out.cols(), rng))));
}

GradCheckResult check_primitive(const std::string& name, Rng& rng) {
    using Fn = std::function<Var(Graph&, Var)>;
    const std::uint64_t weights_seed = rng.below(1u << 30);
    auto wrap = [&](auto body) -> Fn {
        return [=](Graph& g, Var x) {
            Rng w(weights_seed);
            return body(g, x, w);
        };
    };
    const Matrix other = random_matrix(3, 4, rng);
    const Matrix square = random_matrix(4, 4, rng);
    const Matrix row = random_matrix(1, 4, rng);
    Matrix point = random_matrix(3, 4, rng);
    Fn f;
    if (name == "matmul") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, matmul(x, g.constant(square)), w); });
    } else if (name == "matmul_lhs_const") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, matmul(g.constant(random_matrix(2, 3, w)), x), w);
        });
    } else if (name == "matmul_nt") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, matmul_nt(x, g.constant(other)), w); });
    } else if (name == "matmul_nt_self") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, matmul_nt(x, x), w); });
    } else if (name == "add") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, add(x, hadamard(x, x)), w); });
    } else if (name == "add_row") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, add_row(g.constant(other), slice_rows(x, 0, 1)), w);
        });
    } else if (name == "sub") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, sub(g.constant(other), x), w); });
    } else if (name == "hadamard") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, hadamard(x, g.constant(other)), w); });
    } else if (name == "scale") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, scale(x, -2.5), w); });
    } else if (name == "relu") {
        // Keep coordinates away from the kink.
        for (std::size_t i = 0; i < point.size(); ++i) {
            if (std::abs(point[i]) < 0.05) point[i] = 0.5;
        }
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, relu(x), w); });
    } else if (name == "sigmoid") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, sigmoid(x), w); });
    } else if (name == "softmax_rows") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, softmax_rows(x), w); });
    } else if (name == "softmax_rows_masked") {
        point = random_matrix(4, 4, rng);
        const Matrix mask = causal_mask(4);
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, softmax_rows(x, &mask), w); });
    } else if (name == "layer_norm") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, layer_norm(x, g.constant(row), g.constant(random_matrix(1, 4, w))), w);
        });
    } else if (name == "layer_norm_gamma") {
        point = row;
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, layer_norm(g.constant(other), x, g.constant(random_matrix(1, 4, w))), w);
        });
    } else if (name == "layer_norm_beta") {
        point = row;
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, layer_norm(g.constant(other), g.constant(row), x), w);
        });
    } else if (name == "embedding") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, embedding(x, {2, 0, 2, 1}), w); });
    } else if (name == "concat_cols") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, concat_cols({x, g.constant(other), x}), w);
        });
    } else if (name == "slice_cols") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, slice_cols(x, 1, 2), w); });
    } else if (name == "slice_rows") {
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, slice_rows(x, 1, 2), w); });
    } else if (name == "sum") {
        f = wrap([=](Graph&, Var x, Rng&) { return sum(hadamard(x, x)); });
    } else if (name == "mean") {
        f = wrap([=](Graph&, Var x, Rng&) { return mean(hadamard(x, x)); });
    } else if (name == "log") {
        point = random_matrix(3, 4, rng, 0.2, 2.0);
        f = wrap([=](Graph& g, Var x, Rng& w) { return contract(g, log(x), w); });
    } else if (name == "gather") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, gather(x, {{0, 1}, {2, 3}, {0, 1}, {1, 0}}), w);
        });
    } else if (name == "gather_sum") {
        f = wrap([=](Graph& g, Var x, Rng& w) {
            return contract(g, gather_sum(x, {{0, 2}, {}, {3, 3, 1}}), w);
        });
    } else if (name == "bce_with_logits") {
        Matrix targets(3, 4);
        for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        point = random_matrix(3, 4, rng, -3.0, 3.0);
        f = wrap([=](Graph&, Var x, Rng&) { return bce_with_logits(x, targets); });
    } else {
        throw std::invalid_argument("unknown primitive " + name);
    }
    return grad_check(f, point);
}

struct ToySetup {
    Vocabularies vocabs;
    LabeledExample example;
};

// L=5 source words in two sentences, K=3 prototype words, T=4 summary words.
// "e" is missing from the output vocabulary, so only copy mass reaches it.
ToySetup toy_setup() {
    ToySetup s;
    Document doc;
    doc.id = "toy";
    doc.sentences = {{"a", "b", "c"}, {"d", "e"}};
    doc.summary = {"b", "c", "b", "e"};
    s.vocabs.input = Vocabulary::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>", "a", "b", "c", "d", "e"});
    s.vocabs.output = Vocabulary::from_tokens({"<pad>", "<unk>", "<bos>", "<eos>", "a", "b", "c"});
    s.example.doc = doc;
    s.example.oracle_sentences = {0, 1};
    s.example.alignment = {{0, 1}, {1, 2}, {3, 4}};
    s.example.labels = {0, 1, 1, 0, 1};
    s.example.k = 5;
    s.example.gold_prototype = make_prototype(doc, {1, 2, 4});
    return s;
}

}  // namespace

std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed, std::size_t n_seeds) {
    static const std::vector<std::string> primitives{
        "matmul",     "matmul_lhs_const", "matmul_nt",          "matmul_nt_self", "add",
        "add_row",    "sub",              "hadamard",           "scale",          "relu",
        "sigmoid",    "softmax_rows",     "softmax_rows_masked", "layer_norm",    "layer_norm_gamma",
        "layer_norm_beta", "embedding",   "concat_cols",        "slice_cols",     "slice_rows",
        "sum",        "mean",             "log",                "gather",         "gather_sum",
        "bce_with_logits"};
    std::vector<GradCheckCase> cases;
    for (const auto& name : primitives) {
        GradCheckCase c{name, 0.0, 1e-6, 0, 0};
        for (std::size_t s = 0; s < n_seeds; ++s) {
            Rng rng(seed * 1000 + s);
            const auto r = check_primitive(name, rng);
            c.max_relative_error = std::max(c.max_relative_error, r.max_relative_error);
            c.coordinates += r.coordinates;
            c.skipped += r.skipped;
        }
        cases.push_back(c);
    }
    const auto toy = toy_setup();
    AbstractorConfig config;
    config.n_blocks = 1;
    config.n_heads = 2;
    config.d_word = 8;
    config.d_model = 8;
    config.ffn_width = 16;
    config.max_decode_len = 8;
    config.max_source_len = 8;
    const auto targets = attention_targets(toy.example, *toy.example.gold_prototype);
    for (auto guide : {ProtoGuide::kDecoder, ProtoGuide::kEncoder}) {
        GradCheckCase c{guide == ProtoGuide::kDecoder ? "abstractor_loss_decoder_guide"
                                                      : "abstractor_loss_encoder_guide",
                        0.0, 1e-4, 0, 0};
        GenLossConfig loss;
        loss.proto_guide = guide;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            AbstractorModel model(config, toy.vocabs, seed * 1000 + s);
            const auto r = grad_check_params(model.params(), [&](Graph& g) {
                return gen_loss(g, model, toy.example, targets, loss).total;
            });
            c.max_relative_error = std::max(c.max_relative_error, r.max_relative_error);
            c.coordinates += r.coordinates;
            c.skipped += r.skipped;
        }
        cases.push_back(c);
    }
    return cases;
}

std::string cmd_grad_check(const RunConfig& c) {
    const RunPaths paths(c);
    const auto cases = grad_check_suite(c.seed, 10);
    std::ostringstream csv, report;
    csv << header_comment(c) << "\ncheck,max_relative_error,tolerance,coordinates,skipped,passed\n";
    double worst = 0.0;
    bool ok = true;
    for (const auto& k : cases) {
        char err[32];
        std::snprintf(err, sizeof err, "%.3e", k.max_relative_error);
        csv << k.name << ',' << err << ',' << k.tolerance << ',' << k.coordinates << ','
            << k.skipped << ',' << (k.passed() ? 1 : 0) << '\n';
        report << (k.passed() ? "ok   " : "FAIL ") << k.name << " max relative error " << err;
        if (k.skipped > 0) report << " (" << k.skipped << " of " << k.coordinates << " coordinates at a kink)";
        report << '\n';
        worst = std::max(worst, k.max_relative_error);
        ok = ok && k.passed();
    }
    write_text(paths.grad_check, csv.str());
    char w[32];
    std::snprintf(w, sizeof w, "%.3e", worst);
    report << "max relative error " << w << '\n';
    if (!ok) throw ValidationFailure(report.str() + "gradient check failed");
    return report.str();
}

}  // namespace protosum
