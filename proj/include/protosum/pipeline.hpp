#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "protosum/abstractor.hpp"
#include "protosum/corpus.hpp"
#include "protosum/extractor.hpp"
#include "protosum/infer.hpp"
#include "protosum/rouge.hpp"
#include "protosum/trainer.hpp"

namespace protosum {

// A command's prerequisite artifact is absent. The message names the command to run.
class MissingDependency : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Input or result failed a check (bad records, grad-check above threshold, ...).
class ValidationFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    nlohmann::json effective;  // full config after defaults and overrides
    std::string hash;          // FNV-1a of `effective` without the paths section
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "run";
    std::filesystem::path data_dir;  // defaults to out_dir/data

    std::size_t n_docs = 2000;
    SynthParams synth;
    double valid_fraction = 0.1;
    double test_fraction = 0.1;

    std::size_t input_vocab_cap = 50000;
    std::size_t output_vocab_cap = 50000;
    std::size_t max_summary_len = 120;

    ExtractorConfig extractor;
    TrainConfig extractor_train;
    AbstractorConfig abstractor;
    AbstractorTrainConfig abstractor_train;

    InferConfig infer;
    std::optional<std::size_t> k;
    // Without an explicit K, use bin_length of each document's reference summary
    // instead of the standard K stored with the abstractor.
    bool k_from_reference = false;
    std::vector<std::size_t> sweep_k{5, 10, 15, 20};
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<std::filesystem::path> out_dir;
};

inline constexpr const char* kOutDirEnv = "PROTOSUM_OUT_DIR";

// Reads the JSON config (every key optional) and applies overrides. The output
// directory is taken from --out, then the environment variable, then the file.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const ConfigOverrides& overrides);
RunConfig make_run_config(nlohmann::json config, const ConfigOverrides& overrides);

std::string fnv1a_hex(const std::string& bytes);

// Artifact locations under the output directory.
struct RunPaths {
    explicit RunPaths(const RunConfig& config);
    std::filesystem::path split(const std::string& name) const;      // data/<name>.jsonl
    std::filesystem::path labels(const std::string& name) const;     // labels/<name>.jsonl
    std::filesystem::path prototypes(const std::string& name) const; // prototypes/<name>.jsonl
    std::filesystem::path data;
    std::filesystem::path extractor;
    std::filesystem::path extractor_log;
    std::filesystem::path scores;
    std::filesystem::path abstractor;
    std::filesystem::path abstractor_log;
    std::filesystem::path abstractor_valid_log;
    std::filesystem::path summaries;
    std::filesystem::path eval;
    std::filesystem::path length_sweep;
    std::filesystem::path grad_check;
    std::filesystem::path out;
};

inline const std::vector<std::string> kSplits{"train", "valid", "test"};

// Each command writes its artifacts and returns a short human-readable report.
std::string cmd_synth(const RunConfig& config);
std::string cmd_label(const RunConfig& config);
std::string cmd_train_extractor(const RunConfig& config);
std::string cmd_gen_prototypes(const RunConfig& config);
std::string cmd_train_abstractor(const RunConfig& config);
std::string cmd_summarize(const RunConfig& config, const std::optional<std::filesystem::path>& input);
std::string cmd_eval(const RunConfig& config, const std::optional<std::filesystem::path>& candidates);
std::string cmd_length_sweep(const RunConfig& config);
// Throws ValidationFailure when any check exceeds its threshold.
std::string cmd_grad_check(const RunConfig& config);

struct GradCheckCase {
    std::string name;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    std::size_t coordinates = 0;
    std::size_t skipped = 0;  // probes that could not avoid a relu kink or log floor
    // A check that skipped every coordinate compared nothing and does not pass.
    bool passed() const { return max_relative_error < tolerance && skipped < coordinates; }
};

// Every primitive at a random point (tolerance 1e-6) and the full generation loss
// of a toy abstractor under both prototype guides (tolerance 1e-4), per seed.
std::vector<GradCheckCase> grad_check_suite(std::uint64_t seed, std::size_t n_seeds);

struct SweepRow {
    std::size_t k = 0;
    RougeTriple rouge;
    double len_mean = 0.0;
    double len_std = 0.0;
    std::vector<std::size_t> lengths;
};

std::vector<SweepRow> length_sweep(const ExtractorModel& extractor, const AbstractorModel& abstractor,
                                   const std::vector<Document>& docs,
                                   const std::vector<std::size_t>& k_values,
                                   const InferConfig& infer);

std::string format_sweep_csv(const std::vector<SweepRow>& rows, const std::string& header_comment);

}  // namespace protosum
