// protosum: command-line driver for the summarization pipeline.
//
//   protosum <command> [--config PATH] [--seed N] [--k N] [--out DIR]
//
// Exit codes: 0 success, 1 usage, 2 missing dependency, 3 validation failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "protosum/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kMissing = 2, kInvalid = 3 };

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Length-controllable prototype-guided summarization"};
    app.require_subcommand(1, 1);

    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k;
    std::optional<std::string> out_dir;
    std::optional<std::string> input;
    std::optional<std::string> candidates;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run config");
        cmd->add_option("--seed", seed, "random seed (overrides the config)");
        cmd->add_option("--k", k, "prototype size K")->check(CLI::PositiveNumber);
        cmd->add_option("--out", out_dir, "output directory");
    };

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"synth", "generate the synthetic corpus splits"},
        {"label", "oracle sentences, word labels, alignments and length bins"},
        {"train-extractor", "train the prototype extractor"},
        {"gen-prototypes", "word scores and gold prototypes from the trained extractor"},
        {"train-abstractor", "train the prototype-guided abstractor"},
        {"summarize", "decode summaries for the test split"},
        {"eval", "corpus ROUGE of summaries against the test references"},
        {"length-sweep", "ROUGE and output length for each K"},
        {"grad-check", "finite-difference gradient checks"},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        add_common(sub);
        if (std::string(c.name) == "summarize") {
            sub->add_option("--input", input, "corpus JSONL to summarize instead of the test split");
        }
        if (std::string(c.name) == "eval") {
            sub->add_option("--candidates", candidates, "JSONL with id and summary fields");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        protosum::ConfigOverrides overrides;
        overrides.seed = seed;
        overrides.k = k;
        if (out_dir) overrides.out_dir = *out_dir;
        std::optional<std::filesystem::path> cfg;
        if (config_path) cfg = *config_path;
        const auto config = protosum::load_run_config(cfg, overrides);

        std::string report;
        if (command == "synth") {
            report = protosum::cmd_synth(config);
        } else if (command == "label") {
            report = protosum::cmd_label(config);
        } else if (command == "train-extractor") {
            report = protosum::cmd_train_extractor(config);
        } else if (command == "gen-prototypes") {
            report = protosum::cmd_gen_prototypes(config);
        } else if (command == "train-abstractor") {
            report = protosum::cmd_train_abstractor(config);
        } else if (command == "summarize") {
            std::optional<std::filesystem::path> in;
            if (input) in = *input;
            report = protosum::cmd_summarize(config, in);
        } else if (command == "eval") {
            std::optional<std::filesystem::path> cand;
            if (candidates) cand = *candidates;
            report = protosum::cmd_eval(config, cand);
        } else if (command == "length-sweep") {
            report = protosum::cmd_length_sweep(config);
        } else if (command == "grad-check") {
            report = protosum::cmd_grad_check(config);
        }
        std::cout << report;
        return kOk;
    } catch (const protosum::MissingDependency& e) {
        std::cerr << "protosum " << command << ": " << e.what() << '\n';
        return kMissing;
    } catch (const protosum::ValidationFailure& e) {
        std::cerr << "protosum " << command << ": " << e.what() << '\n';
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "protosum " << command << ": " << e.what() << '\n';
        return kInvalid;
    }
}
