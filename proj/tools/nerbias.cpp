// nerbias: subword-PMI debiasing toolkit for BIO sequence tagging.
//
// Subcommands: stats, partition, train, eval, report, synth.
// Exit codes: 0 success, 1 internal error, 2 usage/config error.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "nerbias/commands.hpp"
#include "nerbias/config.hpp"

using namespace nerbias;

namespace {

struct CliOverrides {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> entries;
};

void add_option(CLI::App* cmd, CliOverrides& ov, const std::string& key,
                const std::string& help) {
    cmd->add_option_function<std::string>(
        "--" + key, [&ov, key](const std::string& v) { ov.entries.emplace_back(key, v); }, help);
}

RunConfig resolve(const CliOverrides& ov) {
    RunConfig cfg;
    if (!ov.config_file.empty()) load_config_file(cfg, ov.config_file);
    for (const auto& [k, v] : ov.entries) apply_config_entry(cfg, k, v);
    return cfg;
}

void add_common_options(CLI::App* cmd, CliOverrides& ov) {
    cmd->add_option("--config", ov.config_file, "key = value config file");
    add_option(cmd, ov, "train", "training split (CoNLL)");
    add_option(cmd, ov, "test", "test split (CoNLL)");
    add_option(cmd, ov, "vocab", "subword vocabulary file, one piece per line");
    add_option(cmd, ov, "cui", "surface<TAB>CUI side file");
    add_option(cmd, ov, "out", "output directory");
    add_option(cmd, ov, "resume", "checkpoint to resume training from");
    add_option(cmd, ov, "bias_kind", "pmi | word_freq | uniform | random");
    add_option(cmd, ov, "smoothing_k", "add-K smoothing constant (default 100)");
    add_option(cmd, ov, "alpha", "word-frequency smoothing constant");
    add_option(cmd, ov, "lambda", "temperature slope over entity length");
    add_option(cmd, ov, "length_unit", "words | subwords");
    add_option(cmd, ov, "class_collapse", "collapse the bias class axis to {B,I,O}");
    add_option(cmd, ov, "vocab_lowercase", "lowercase words before tokenizing");
    add_option(cmd, ov, "dict_lowercase", "lowercase surfaces in partition dictionaries");
    add_option(cmd, ov, "unk_piece", "unknown-piece symbol (default [UNK])");
    add_option(cmd, ov, "max_sentence_len", "split sentences longer than this (0 = off)");
    add_option(cmd, ov, "embed_dim", "embedding width");
    add_option(cmd, ov, "hidden_dim", "hidden layer width");
    add_option(cmd, ov, "context_window", "odd window of subword positions");
    add_option(cmd, ov, "decoder", "softmax | crf");
    add_option(cmd, ov, "optimizer", "adam | sgd");
    add_option(cmd, ov, "learning_rate", "Adam learning rate");
    add_option(cmd, ov, "epochs", "training epochs");
    add_option(cmd, ov, "batch_size", "sentences per optimizer step");
    add_option(cmd, ov, "mode", "none | bias_product | learned_mixin | learned_mixin_h");
    add_option(cmd, ov, "entropy_weight", "Learned-Mixin+H penalty weight (default 0.2)");
    add_option(cmd, ov, "seeds", "comma-separated seed list");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"subword-PMI debiasing toolkit for BIO sequence tagging"};
    app.require_subcommand(1);

    CliOverrides ov;
    SynthCliConfig synth_cfg;

    CLI::App* stats = app.add_subcommand("stats", "corpus statistics and the bias table");
    CLI::App* partition = app.add_subcommand("partition", "Mem/Unseen or Mem/Syn/Con split");
    CLI::App* train_cmd = app.add_subcommand("train", "train one tagger per seed");
    CLI::App* eval_cmd = app.add_subcommand("eval", "score per-seed checkpoints");
    CLI::App* report = app.add_subcommand("report", "aggregate per-seed reports");
    for (CLI::App* cmd : {stats, partition, train_cmd, eval_cmd, report})
        add_common_options(cmd, ov);

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus bundle");
    synth->add_option("--preset", synth_cfg.preset, "oov | long");
    synth->add_option("--out", synth_cfg.out_dir, "output directory")->required();
    synth->add_option("--seed", synth_cfg.synth.seed, "generator seed");
    synth->add_option("--train-sentences", synth_cfg.synth.train_sentences, "train size");
    synth->add_option("--test-sentences", synth_cfg.synth.test_sentences, "test size");

    try {
        app.parse(argc, argv);
        if (stats->parsed()) run_stats(resolve(ov));
        else if (partition->parsed()) run_partition(resolve(ov));
        else if (train_cmd->parsed()) run_train(resolve(ov));
        else if (eval_cmd->parsed()) run_eval(resolve(ov));
        else if (report->parsed()) run_report(resolve(ov));
        else if (synth->parsed()) run_synth(synth_cfg);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
