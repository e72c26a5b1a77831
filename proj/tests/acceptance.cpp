// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails.
//
//   acceptance [--work DIR] [--only N[,N...]]
//
// Criteria 6 and 7 train the desk-scale pipeline in DIR/full (about 15 minutes on
// one core); criterion 8 runs a reduced pipeline twice in DIR/det_a and DIR/det_b.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "protosum/abstractor.hpp"
#include "protosum/extractor.hpp"
#include "protosum/infer.hpp"
#include "protosum/labeler.hpp"
#include "protosum/nn.hpp"
#include "protosum/pipeline.hpp"
#include "protosum/rouge.hpp"

using namespace protosum;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, const char* f = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// -- 1. ROUGE against brute force --------------------------------------------------

double brute_overlap(const Tokens& a, const Tokens& b, std::size_t n, double* na, double* nb) {
    std::map<Tokens, int> ca, cb;
    for (std::size_t i = 0; i + n <= a.size(); ++i) ca[Tokens(a.begin() + i, a.begin() + i + n)]++;
    for (std::size_t i = 0; i + n <= b.size(); ++i) cb[Tokens(b.begin() + i, b.begin() + i + n)]++;
    *na = a.size() >= n ? static_cast<double>(a.size() - n + 1) : 0.0;
    *nb = b.size() >= n ? static_cast<double>(b.size() - n + 1) : 0.0;
    double overlap = 0.0;
    for (const auto& [gram, count] : ca) {
        auto it = cb.find(gram);
        if (it != cb.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

std::size_t brute_lcs(const Tokens& a, const Tokens& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
        }
    }
    return t[a.size()][b.size()];
}

RougeScore brute_score(double overlap, double nc, double nr) {
    RougeScore s;
    if (nc == 0.0 || nr == 0.0) return s;
    s.precision = overlap / nc;
    s.recall = overlap / nr;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

double score_gap(const RougeScore& x, const RougeScore& y) {
    return std::max({std::abs(x.precision - y.precision), std::abs(x.recall - y.recall),
                     std::abs(x.f1 - y.f1)});
}

Outcome rouge_oracle() {
    const auto t0 = Clock::now();
    Rng rng(20240601);
    auto random_tokens = [&] {
        Tokens t(1 + rng.below(40));
        for (auto& w : t) w = "w" + std::to_string(rng.below(20));
        return t;
    };
    double worst = 0.0;
    for (int pair = 0; pair < 200; ++pair) {
        const auto a = random_tokens();
        const auto b = random_tokens();
        for (int n : {1, 2}) {
            double na = 0.0, nb = 0.0;
            const double ov = brute_overlap(a, b, static_cast<std::size_t>(n), &na, &nb);
            worst = std::max(worst, score_gap(rouge_n(a, b, n), brute_score(ov, na, nb)));
        }
        const double l = static_cast<double>(brute_lcs(a, b));
        worst = std::max(worst, score_gap(rouge_l(a, b), brute_score(l, static_cast<double>(a.size()),
                                                                      static_cast<double>(b.size()))));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 5.0,
            "200 pairs, max deviation " + num(worst) + ", " + num(secs, "%.2f") + " s"};
}

// -- 2. gradient checks -------------------------------------------------------------

Outcome gradients() {
    const auto t0 = Clock::now();
    const auto cases = grad_check_suite(1, 10);
    const double secs = seconds_since(t0);
    double prim = 0.0, full = 0.0;
    std::size_t skipped = 0;
    bool ok = true;
    std::string failed;
    for (const auto& c : cases) {
        (c.tolerance < 1e-5 ? prim : full) = std::max(c.tolerance < 1e-5 ? prim : full, c.max_relative_error);
        skipped += c.skipped;
        if (!c.passed()) {
            ok = false;
            failed += " " + c.name + "=" + num(c.max_relative_error);
        }
    }
    return {ok && secs < 120.0, std::to_string(cases.size()) + " checks x 10 seeds, primitives max " +
                                    num(prim) + ", abstractor max " + num(full) + ", " +
                                    std::to_string(skipped) + " kink coordinates skipped, " +
                                    num(secs, "%.1f") + " s" + (failed.empty() ? "" : ";" + failed)};
}

// -- 3. distribution invariants -----------------------------------------------------

Outcome distributions() {
    const auto docs = documents_of(synth_corpus(77, 20, SynthParams{}));
    const auto vocabs = build_vocab(docs, 50000, 40);  // small output vocab, so copies matter
    AbstractorConfig config;
    config.max_decode_len = 24;
    double sum_err = 0.0, attn_err = 0.0, mix_err = 0.0, support_err = 0.0, min_mix = 1.0;
    for (int trial = 0; trial < 100; ++trial) {
        AbstractorModel model(config, vocabs, 1000 + static_cast<std::uint64_t>(trial));
        Rng rng(static_cast<std::uint64_t>(trial));
        const auto& doc = docs[rng.below(docs.size())];
        const auto source = doc.flat();
        Tokens proto;
        for (std::size_t i = 0; i < source.size(); ++i) {
            if (rng.bernoulli(0.3)) proto.push_back(source[i]);
        }
        if (proto.empty()) proto.push_back(source[0]);
        Tokens prefix{kBosToken};
        const auto steps = 1 + rng.below(10);
        for (std::size_t i = 0; i < steps; ++i) prefix.push_back(source[rng.below(source.size())]);

        Graph g(&model.params(), false);
        const auto enc = model.joint_encode(g, source, proto);
        const auto out = model.decode(g, enc, prefix);
        const ExtendedVocab ext(model.vocabs().output, enc.source, enc.prototype);
        const auto t = prefix.size() - 1;
        const auto step = step_output(out, t, ext);

        sum_err = std::max(sum_err, std::abs(std::accumulate(step.p.begin(), step.p.end(), 0.0) - 1.0));
        double lam = 0.0;
        for (double m : step.mixture) {
            min_mix = std::min(min_mix, m);
            lam += m;
        }
        mix_err = std::max(mix_err, std::abs(lam - 1.0));
        for (const auto* a : {&out.source_attention, &out.prototype_attention, &enc.prototype_to_source}) {
            const auto& m = a->value();
            for (std::size_t r = 0; r < m.rows(); ++r) {
                double s = 0.0;
                for (double v : m.row_span(r)) s += v;
                attn_err = std::max(attn_err, std::abs(s - 1.0));
            }
        }
        // Rebuild the mixture from its parts: generation mass only on the output
        // vocabulary, copy mass only on source and prototype tokens.
        std::vector<double> expect(ext.size(), 0.0);
        const auto& pg = out.vocab_probs.value();
        for (std::size_t v = 0; v < pg.cols(); ++v) expect[v] += step.mixture[0] * pg(t, v);
        for (std::size_t l = 0; l < source.size(); ++l) {
            expect[ext.source_ids()[l]] += step.mixture[1] * out.source_attention.value()(t, l);
        }
        for (std::size_t k = 0; k < proto.size(); ++k) {
            expect[ext.prototype_ids()[k]] += step.mixture[2] * out.prototype_attention.value()(t, k);
        }
        for (std::size_t v = 0; v < expect.size(); ++v) {
            support_err = std::max(support_err, std::abs(expect[v] - step.p[v]));
        }
        if (ext.id("never-seen-token").has_value()) support_err = 1.0;
    }
    const bool ok = sum_err <= 1e-6 && mix_err <= 1e-9 && min_mix >= 0.0 && attn_err <= 1e-9 &&
                    support_err <= 1e-12;
    return {ok, "100 steps, |sum p - 1| " + num(sum_err) + ", |sum lambda - 1| " + num(mix_err) +
                    ", attention rows " + num(attn_err) + ", support residual " + num(support_err)};
}

// -- 4. labeler ------------------------------------------------------------------------

Outcome labeler() {
    bool ok = true;
    std::string bad;
    auto expect = [&](bool cond, const char* what) {
        if (!cond) {
            ok = false;
            bad += std::string(" ") + what;
        }
    };
    auto doc3 = [](Tokens summary) {
        return Document{"d", {{"a", "b", "c"}, {"d", "e", "f"}, {"g", "h", "i"}}, std::move(summary)};
    };
    using Idx = std::vector<std::size_t>;
    expect(select_oracle_sentences(doc3({"g", "h", "i"})) == Idx{2}, "oracle-1");
    expect(select_oracle_sentences(doc3({"a", "b", "c", "g", "h", "i"})) == Idx{0, 2}, "oracle-2");
    expect(select_oracle_sentences(doc3({"q"})) == Idx{0}, "oracle-3");
    expect(align_lcs({"a", "b", "c"}, {{"a", 0}, {"b", 1}, {"c", 2}}) == Alignment{{0, 0}, {1, 1}, {2, 2}},
           "align-1");
    expect(align_lcs({"a", "b"}, {{"a", 0}, {"x", 1}, {"b", 2}}) == Alignment{{0, 0}, {1, 2}}, "align-2");
    expect(align_lcs({"a", "a"}, {{"a", 0}}) == Alignment{{0, 0}}, "align-3");
    expect(bin_length(33) == 35, "bin-1");
    expect(bin_length(32) == 30, "bin-2");
    expect(bin_length(1) == 5, "bin-3");

    const auto synth = synth_corpus(5, 500, SynthParams{});
    double tp = 0, fp = 0, fn = 0;
    for (const auto& s : synth) {
        const auto ex = label_document(s.doc);
        for (std::size_t i = 0; i < ex.labels.size(); ++i) {
            tp += ex.labels[i] == 1 && s.salient_words[i] == 1;
            fp += ex.labels[i] == 1 && s.salient_words[i] == 0;
            fn += ex.labels[i] == 0 && s.salient_words[i] == 1;
        }
    }
    const double f1 = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    expect(f1 == 1.0, "synthetic-f1");
    return {ok, "9 golden examples" + std::string(bad.empty() ? " reproduced" : " failed:" + bad) +
                    ", label F1 vs salience mask on 500 documents " + num(f1, "%.6f")};
}

// -- 5. prototype extraction --------------------------------------------------------

std::vector<std::size_t> brute_top_k(const std::vector<double>& w, std::size_t k) {
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    idx.resize(std::min(k, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Outcome prototypes() {
    auto doc_of = [](std::size_t n) {
        Document d{"d", {{}}, {"x"}};
        for (std::size_t i = 0; i < n; ++i) d.sentences[0].push_back("t" + std::to_string(i % 7));
        return d;
    };
    auto check = [&](const std::vector<double>& w, std::size_t k) {
        const auto doc = doc_of(w.size());
        ImportanceScores s;
        s.weighted = w;
        const auto p = extract_prototype(doc, s, k);
        if (p.positions != brute_top_k(w, k)) return false;
        if (!std::is_sorted(p.positions.begin(), p.positions.end()) ||
            std::adjacent_find(p.positions.begin(), p.positions.end()) != p.positions.end()) {
            return false;
        }
        const auto flat = doc.flat();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (p.tokens[i] != flat[p.positions[i]]) return false;
        }
        return true;
    };
    Rng rng(515);
    std::size_t random_bad = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> w(1 + rng.below(50));
        for (auto& v : w) v = rng.uniform();
        if (!check(w, 1 + rng.below(w.size() + 5))) ++random_bad;
    }
    // Exhaustive over scores drawn from {0, 0.5, 1} (many ties) for L <= 8, all K.
    std::size_t exhaustive = 0, exhaustive_bad = 0;
    for (std::size_t len = 1; len <= 8; ++len) {
        std::size_t combos = 1;
        for (std::size_t i = 0; i < len; ++i) combos *= 3;
        for (std::size_t code = 0; code < combos; ++code) {
            std::vector<double> w(len);
            std::size_t c = code;
            for (auto& v : w) {
                v = 0.5 * static_cast<double>(c % 3);
                c /= 3;
            }
            for (std::size_t k = 1; k <= len + 1; ++k) {
                ++exhaustive;
                if (!check(w, k)) ++exhaustive_bad;
            }
        }
    }
    return {random_bad == 0 && exhaustive_bad == 0,
            "500 random vectors (" + std::to_string(random_bad) + " mismatches), " +
                std::to_string(exhaustive) + " exhaustive cases (" + std::to_string(exhaustive_bad) +
                " mismatches)"};
}

// -- pipeline helpers --------------------------------------------------------------

RunConfig config_at(const fs::path& out, nlohmann::json patch = nlohmann::json::object()) {
    ConfigOverrides o;
    o.out_dir = out;
    return make_run_config(std::move(patch), o);
}

void run_pipeline(const RunConfig& c) {
    cmd_synth(c);
    cmd_label(c);
    cmd_train_extractor(c);
    cmd_gen_prototypes(c);
    cmd_train_abstractor(c);
    cmd_summarize(c, std::nullopt);
    cmd_eval(c, std::nullopt);
}

double csv_value(const fs::path& path, const std::string& row, std::size_t column) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(row + ",", 0) != 0) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t i = 0; i <= column; ++i) std::getline(ss, cell, ',');
        return std::stod(cell);
    }
    throw std::runtime_error("row " + row + " not found in " + path.string());
}

// -- 6 and 7. desk-scale run and length control -------------------------------------

struct FullRun {
    bool ran = false;
    std::string error;
    double seconds = 0.0;
    RunConfig config;
};

FullRun full_run(const fs::path& work) {
    FullRun r;
    const auto out = work / "full";
    fs::remove_all(out);
    r.config = config_at(out, {{"infer", {{"k_policy", "reference"}}}});
    const auto t0 = Clock::now();
    try {
        run_pipeline(r.config);
        r.ran = true;
    } catch (const std::exception& e) {
        r.error = e.what();
    }
    r.seconds = seconds_since(t0);
    return r;
}

Outcome end_to_end(const FullRun& run) {
    if (!run.ran) return {false, "pipeline failed: " + run.error};
    const RunPaths paths(run.config);
    const auto extractor = ExtractorModel::load(paths.extractor);
    const auto test_docs = read_corpus(paths.split("test"));
    const auto test_labels = read_labels(paths.labels("test"), test_docs);
    const double f1 = word_label_f1(extractor, test_labels);
    const double r1 = csv_value(paths.eval, "rouge1", 3);
    const auto& e = run.config.extractor;
    const auto& a = run.config.abstractor;
    const bool shape = run.config.n_docs == 2000 && e.d_model == 64 && e.n_blocks == 2 && a.d_model == 64 &&
                       a.n_blocks == 2 && a.n_heads == 2;
    return {shape && f1 >= 0.95 && r1 >= 0.85 && run.seconds <= 1800.0,
            "2000 documents, extractor test word F1 " + num(f1, "%.4f") + ", abstractor ROUGE-1 F1 " +
                num(r1, "%.4f") + " (K = bin of reference length), " + num(run.seconds / 60.0, "%.1f") +
                " min"};
}

Outcome length_control(const FullRun& run) {
    if (!run.ran) return {false, "no trained model: " + run.error};
    const RunPaths paths(run.config);
    const auto extractor = ExtractorModel::load(paths.extractor);
    const auto abstractor = AbstractorModel::load(paths.abstractor).first;
    std::vector<Document> docs;
    for (const auto& d : read_corpus(paths.split("test"))) docs.push_back(d);
    const std::vector<std::size_t> ks{5, 10, 15, 20};
    const auto rows = length_sweep(extractor, abstractor, docs, ks, run.config.infer);
    auto csv = format_sweep_csv(rows, "# acceptance length sweep");
    std::ofstream(paths.out / "acceptance_length_sweep.csv") << csv;

    bool increasing = true, recall_up = true, precision_down = true;
    std::size_t within = 0, total = 0;
    std::string means;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (auto len : rows[i].lengths) {
            ++total;
            within += std::abs(static_cast<double>(len) - static_cast<double>(rows[i].k)) <= 5.0;
        }
        means += (i ? "/" : "") + num(rows[i].len_mean, "%.2f");
        if (i == 0) continue;
        increasing = increasing && rows[i].len_mean > rows[i - 1].len_mean;
        recall_up = recall_up && rows[i].rouge.rougeL.recall >= rows[i - 1].rouge.rougeL.recall;
        precision_down = precision_down && rows[i].rouge.rougeL.precision <= rows[i - 1].rouge.rougeL.precision;
    }
    const double frac = total ? static_cast<double>(within) / static_cast<double>(total) : 0.0;
    return {increasing && frac >= 0.8 && recall_up && precision_down,
            "K=5/10/15/20 mean length " + means + (increasing ? " (strictly increasing)" : " (NOT increasing)") +
                ", within +-5: " + num(100.0 * frac, "%.1f") + "%, recall non-decreasing " +
                (recall_up ? "yes" : "no") + ", precision non-increasing " + (precision_down ? "yes" : "no")};
}

// -- 8. determinism ---------------------------------------------------------------------

std::map<std::string, std::string> artifact_bytes(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[fs::relative(e.path(), dir).string()] =
            std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    return files;
}

Outcome determinism(const fs::path& work) {
    const nlohmann::json small = {
        {"synth", {{"n_docs", 120}}},
        {"extractor", {{"model", {{"d_model", 16}, {"n_blocks", 1}, {"ffn_width", 32}}},
                       {"train", {{"epochs", 2}, {"warmup_steps", 20}}}}},
        {"abstractor", {{"model", {{"d_model", 16}, {"d_word", 16}, {"n_blocks", 1}, {"ffn_width", 32}}},
                        {"train", {{"epochs", 2}, {"warmup_steps", 20}}}}},
        {"sweep", {{"k_values", {5, 10}}}},
    };
    std::vector<std::map<std::string, std::string>> runs;
    try {
        for (const char* name : {"det_a", "det_b"}) {
            const auto out = work / name;
            fs::remove_all(out);
            const auto c = config_at(out, small);
            run_pipeline(c);
            cmd_length_sweep(c);
            runs.push_back(artifact_bytes(out));
        }
    } catch (const std::exception& e) {
        return {false, std::string("reduced pipeline failed: ") + e.what()};
    }
    std::size_t csv = 0, ckpt = 0;
    std::vector<std::string> differ;
    for (const auto& [name, bytes] : runs[0]) {
        auto it = runs[1].find(name);
        if (it == runs[1].end() || it->second != bytes) differ.push_back(name);
        if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") ++csv;
        if (name.find("params.bin") != std::string::npos) ++ckpt;
    }
    if (runs[1].size() != runs[0].size()) differ.push_back("(file sets differ)");
    std::string detail = std::to_string(runs[0].size()) + " artifacts (" + std::to_string(csv) + " CSV, " +
                         std::to_string(ckpt) + " checkpoints) compared across two runs";
    if (!differ.empty()) detail += "; differing: " + differ.front();
    return {differ.empty() && csv >= 4 && ckpt == 2, detail};
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = "acceptance_work";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else if (arg == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
        } else {
            std::fprintf(stderr, "usage: acceptance [--work DIR] [--only N[,N...]]\n");
            return 1;
        }
    }
    fs::create_directories(work);
    auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

    int failures = 0;
    auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
        if (!wanted(n)) return;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "rouge oracle", rouge_oracle);
    report(2, "gradient checks", gradients);
    report(3, "distribution invariants", distributions);
    report(4, "labeler golden tests", labeler);
    report(5, "prototype extraction", prototypes);
    FullRun run;
    if (wanted(6) || wanted(7)) run = full_run(work);
    report(6, "end-to-end synthetic run", [&] { return end_to_end(run); });
    report(7, "length control", [&] { return length_control(run); });
    report(8, "determinism", [&] { return determinism(work); });
    return failures == 0 ? 0 : 1;
}
