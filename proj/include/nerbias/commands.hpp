#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nerbias/bias.hpp"
#include "nerbias/config.hpp"
#include "nerbias/corpus.hpp"
#include "nerbias/ensemble.hpp"
#include "nerbias/eval.hpp"
#include "nerbias/partition.hpp"
#include "nerbias/synth.hpp"
#include "nerbias/tagger.hpp"
#include "nerbias/tokenizer.hpp"

namespace nerbias {

namespace detail {

inline void ensure_out_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    write_file(cfg.out_dir + "/config_resolved.txt", resolved_config_text(cfg));
}

inline Dataset load_split(const std::string& path, int max_sentence_len) {
    Dataset d = parse_conll(read_file(path));
    for (Sentence& s : d) s.tags = repair_bio(std::move(s.tags));
    if (max_sentence_len > 0) d = split_long_sentences(d, static_cast<size_t>(max_sentence_len));
    return d;
}

inline std::string ratio_text(double ratio) {
    return std::isinf(ratio) ? "inf" : format_sig(ratio, 12);
}

}  // namespace detail

// Everything a trained or evaluated run needs in memory.
struct Pipeline {
    Dataset train;
    Dataset test;
    Vocab vocab;
    ClassSet classes;       // tagger axis: full BIO tag set of the train split
    ClassSet bias_classes;  // equal to classes, or collapsed {B,I,O}
    std::vector<TokenizedSentence> train_tok;
    std::vector<TokenizedSentence> test_tok;

    static Pipeline load(const RunConfig& cfg, bool with_test) {
        Pipeline p{Dataset{},
                   Dataset{},
                   load_vocab(cfg.vocab_path, cfg.unk_piece, cfg.vocab_lowercase),
                   ClassSet({"O"}, false),
                   ClassSet({"O"}, false),
                   {},
                   {}};
        p.train = detail::load_split(cfg.train_path, cfg.max_sentence_len);
        p.classes = ClassSet::from_dataset(p.train, false);
        p.bias_classes = cfg.class_collapse ? ClassSet::from_dataset(p.train, true) : p.classes;
        p.train_tok = tokenize_dataset(p.vocab, p.train);
        if (with_test) {
            p.test = detail::load_split(cfg.test_path, cfg.max_sentence_len);
            p.test_tok = tokenize_dataset(p.vocab, p.test);
        }
        return p;
    }
};

// Bias statistics for the configured kind, with owning storage.
struct BuiltBias {
    BiasKind kind = BiasKind::pmi;
    CountTable counts;
    PmiTable pmi;
    BiasTable table;
    TemperatureConfig temp;

    BiasModel model() const {
        BiasModel m;
        m.kind = kind;
        m.temp = temp;
        if (kind == BiasKind::pmi) m.pmi = &pmi;
        else m.table = &table;
        return m;
    }
};

inline BuiltBias build_bias(const RunConfig& cfg, const Pipeline& p) {
    BuiltBias b;
    b.kind = cfg.bias_kind;
    b.temp = TemperatureConfig{cfg.lambda, cfg.length_unit};
    switch (cfg.bias_kind) {
        case BiasKind::pmi:
            b.counts = count_cooccurrence(p.train_tok, p.bias_classes);
            b.pmi = compute_pmi(b.counts, cfg.smoothing_k);
            break;
        case BiasKind::word_freq:
            b.table = word_frequency_bias(p.train, p.bias_classes, cfg.alpha);
            break;
        case BiasKind::uniform:
            b.table = uniform_bias(p.bias_classes);
            break;
        case BiasKind::random: {
            CountTable counts = count_cooccurrence(p.train_tok, p.bias_classes);
            std::vector<std::string> keys;
            for (const auto& [k, _] : counts.joint) keys.push_back(k);
            b.table = random_bias(p.bias_classes, keys, cfg.seeds.front());
            break;
        }
    }
    return b;
}

// stats: corpus statistics plus the bias table of the configured kind.
inline void run_stats(const RunConfig& cfg) {
    cfg.validate_for("stats");
    Pipeline p = Pipeline::load(cfg, false);
    detail::ensure_out_dir(cfg);

    std::string stats = "split\tsentences\tpositive\tnegative\tratio\n";
    CorpusStats st = corpus_stats(p.train);
    stats += "train\t" + std::to_string(st.sentence_count) + "\t" +
             std::to_string(st.positive_count) + "\t" + std::to_string(st.negative_count) + "\t" +
             detail::ratio_text(st.ratio) + "\n";
    if (!cfg.test_path.empty()) {
        CorpusStats te = corpus_stats(detail::load_split(cfg.test_path, cfg.max_sentence_len));
        stats += "test\t" + std::to_string(te.sentence_count) + "\t" +
                 std::to_string(te.positive_count) + "\t" + std::to_string(te.negative_count) +
                 "\t" + detail::ratio_text(te.ratio) + "\n";
    }
    write_file(cfg.out_dir + "/stats.tsv", stats);

    BuiltBias bias = build_bias(cfg, p);
    std::string checksum = hex64(fnv1a64(serialize_conll(p.train)));
    std::string table_text =
        bias.kind == BiasKind::pmi
            ? export_pmi_table(bias.counts, bias.pmi, cfg.lambda, checksum)
            : export_bias_table(bias.table,
                                {{"alpha", format_exact(cfg.alpha)},
                                 {"lambda", format_exact(cfg.lambda)}},
                                checksum);
    write_file(cfg.out_dir + "/bias_" + bias_kind_name(bias.kind) + ".tsv", table_text);
}

// partition: Mem/Unseen (or Mem/Syn/Con with a CUI file) over the test split.
inline void run_partition(const RunConfig& cfg) {
    cfg.validate_for("partition");
    Dataset train = detail::load_split(cfg.train_path, cfg.max_sentence_len);
    Dataset test = detail::load_split(cfg.test_path, cfg.max_sentence_len);
    detail::ensure_out_dir(cfg);

    std::optional<std::map<std::string, std::string>> cui;
    if (!cfg.cui_path.empty()) cui = load_cui_map(read_file(cfg.cui_path));
    PartitionDicts dicts = build_dicts(train, cui ? &*cui : nullptr, cfg.dict_lowercase);
    auto mentions = partition_mentions(test, dicts);

    std::string tsv = "sentence\tstart\tend\ttype\tsurface\tset\n";
    for (const auto& m : mentions)
        tsv += std::to_string(m.sentence) + "\t" + std::to_string(m.span.start) + "\t" +
               std::to_string(m.span.end) + "\t" + m.span.etype + "\t" + m.span.surface + "\t" +
               mention_set_name(m.set) + "\n";
    write_file(cfg.out_dir + "/partition.tsv", tsv);

    PartitionCounts counts = partition_counts(mentions);
    std::string summary = "set\tcount\n";
    summary += "Mem\t" + std::to_string(counts.mem) + "\n";
    if (dicts.has_cui) {
        summary += "Syn\t" + std::to_string(counts.syn) + "\n";
        summary += "Con\t" + std::to_string(counts.con) + "\n";
    } else {
        summary += "Unseen\t" + std::to_string(counts.unseen) + "\n";
    }
    summary += "total\t" + std::to_string(counts.total()) + "\n";
    write_file(cfg.out_dir + "/partition_counts.tsv", summary);
}

inline std::string checkpoint_path(const RunConfig& cfg, uint64_t seed) {
    return cfg.out_dir + "/checkpoint_seed" + std::to_string(seed) + ".txt";
}

// train: one run per seed; bias is applied through the configured objective
// and only during training.
inline void run_train(const RunConfig& cfg) {
    cfg.validate_for("train");
    Pipeline p = Pipeline::load(cfg, false);
    detail::ensure_out_dir(cfg);

    BuiltBias bias = build_bias(cfg, p);
    BiasModel bias_model = bias.model();
    EnsembleConfig ecfg{cfg.mode, cfg.entropy_weight};

    for (uint64_t seed : cfg.seeds) {
        TaggerConfig tcfg = cfg.tagger;
        tcfg.seed = seed;
        tcfg.num_classes = static_cast<int>(p.classes.size());

        std::optional<TrainSnapshot> resume;
        if (!cfg.resume_path.empty()) resume = load_checkpoint(read_file(cfg.resume_path));

        TrainResult result =
            train(p.train, p.train_tok, p.classes, tcfg, ecfg,
                  cfg.mode == EnsembleMode::none ? nullptr : &bias_model,
                  static_cast<int>(p.vocab.size()), resume ? &*resume : nullptr);

        TrainSnapshot snap = result.snapshot();
        write_file(checkpoint_path(cfg, seed), save_checkpoint(snap));

        std::string log = "# config_hash = " + config_hash(cfg) + "\n";
        log += "epoch\tmean_loss\ttoken_accuracy\twall_seconds\n";
        for (const EpochLog& e : result.log)
            log += std::to_string(e.epoch) + "\t" + format_exact(e.mean_loss) + "\t" +
                   format_exact(e.token_accuracy) + "\t" + format_sig(e.wall_seconds, 6) + "\n";
        write_file(cfg.out_dir + "/train_log_seed" + std::to_string(seed) + ".tsv", log);
    }
}

struct SeedEval {
    uint64_t seed = 0;
    EvalReport report;
};

inline SeedEval evaluate_checkpoint(const RunConfig& cfg, const Pipeline& p,
                                    const PartitionDicts& dicts, uint64_t seed,
                                    const std::string& ckpt_path) {
    TrainSnapshot snap = load_checkpoint(read_file(ckpt_path));
    std::vector<std::vector<EntitySpan>> gold, pred;
    Dataset predicted_tags;
    for (size_t s = 0; s < p.test.size(); ++s) {
        gold.push_back(extract_spans(p.test[s]));
        auto tags = predict_word_tags(snap.model, p.classes, p.test_tok[s],
                                      p.test[s].words.size());
        pred.push_back(extract_spans(tags, &p.test[s].words));
        predicted_tags.push_back({p.test[s].words, tags});
    }
    auto mentions = partition_mentions(p.test, dicts);
    SeedEval out{seed, build_report(gold, pred, mentions)};

    write_file(cfg.out_dir + "/predictions_seed" + std::to_string(seed) + ".conll",
               serialize_conll(predicted_tags));
    write_file(cfg.out_dir + "/report_seed" + std::to_string(seed) + ".tsv",
               report_to_tsv(out.report));
    write_file(cfg.out_dir + "/report_seed" + std::to_string(seed) + ".md",
               report_to_markdown(out.report));
    return out;
}

// eval: score every per-seed checkpoint on the test split. The bias path is
// absent here by construction.
inline std::vector<SeedEval> run_eval(const RunConfig& cfg) {
    cfg.validate_for("eval");
    Pipeline p = Pipeline::load(cfg, true);
    detail::ensure_out_dir(cfg);

    std::optional<std::map<std::string, std::string>> cui;
    if (!cfg.cui_path.empty()) cui = load_cui_map(read_file(cfg.cui_path));
    PartitionDicts dicts = build_dicts(p.train, cui ? &*cui : nullptr, cfg.dict_lowercase);

    std::vector<SeedEval> out;
    for (uint64_t seed : cfg.seeds)
        out.push_back(evaluate_checkpoint(cfg, p, dicts, seed, checkpoint_path(cfg, seed)));
    return out;
}

// report: aggregate the per-seed reports already in the output directory.
inline void run_report(const RunConfig& cfg) {
    cfg.validate_for("report");
    detail::ensure_out_dir(cfg);

    struct Row {
        std::string seed;
        std::map<std::string, double> vals;  // Mem/Syn/Con/Unseen recall, P, R, F1
    };
    std::vector<Row> rows;
    for (uint64_t seed : cfg.seeds) {
        std::string path = cfg.out_dir + "/report_seed" + std::to_string(seed) + ".tsv";
        std::string text = read_file(path);
        Row row;
        row.seed = std::to_string(seed);
        size_t pos = 0;
        bool first = true;
        while (pos < text.size()) {
            size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            if (first) {
                first = false;
                continue;
            }
            std::vector<std::string> cols;
            size_t start = 0;
            while (true) {
                size_t tab = line.find('\t', start);
                if (tab == std::string::npos) {
                    cols.push_back(line.substr(start));
                    break;
                }
                cols.push_back(line.substr(start, tab - start));
                start = tab + 1;
            }
            if (cols.size() < 4) continue;
            if (cols[0] == "total") {
                row.vals["P"] = parse_double(cols[1], path);
                row.vals["R"] = parse_double(cols[2], path);
                row.vals["F1"] = parse_double(cols[3], path);
            } else if (cols[0] == "Mem" || cols[0] == "Unseen" || cols[0] == "Syn" ||
                       cols[0] == "Con") {
                row.vals[cols[0]] = parse_double(cols[2], path);
            }
        }
        rows.push_back(std::move(row));
    }

    const std::vector<std::string> columns = {"Mem", "Syn", "Con", "Unseen", "P", "R", "F1"};
    std::map<std::string, std::pair<double, int>> mean;
    for (const Row& r : rows)
        for (const auto& [k, v] : r.vals) {
            mean[k].first += v;
            mean[k].second += 1;
        }

    auto cell = [&](const Row& r, const std::string& c) {
        auto it = r.vals.find(c);
        return it == r.vals.end() ? std::string("-") : format_sig(it->second, 12);
    };
    std::string tsv = "seed";
    for (const auto& c : columns) tsv += "\t" + c;
    tsv += "\n";
    for (const Row& r : rows) {
        tsv += r.seed;
        for (const auto& c : columns) tsv += "\t" + cell(r, c);
        tsv += "\n";
    }
    tsv += "mean";
    for (const auto& c : columns) {
        auto it = mean.find(c);
        tsv += "\t";
        tsv += it == mean.end() ? "-" : format_sig(it->second.first / it->second.second, 12);
    }
    tsv += "\n";
    write_file(cfg.out_dir + "/report.tsv", tsv);

    auto pct = [](double v) { return format_sig(100.0 * v, 4); };
    std::string md = "| seed | Mem (R) | Syn (R) | Con (R) | Unseen (R) | Total (P/R/F) |\n";
    md += "|---|---|---|---|---|---|\n";
    auto md_row = [&](const std::string& name, const std::map<std::string, double>& vals) {
        auto get = [&](const std::string& c) -> std::string {
            auto it = vals.find(c);
            return it == vals.end() ? "-" : pct(it->second);
        };
        std::string total = vals.count("P") ? pct(vals.at("P")) + " / " + pct(vals.at("R")) +
                                                  " / " + pct(vals.at("F1"))
                                            : "-";
        md += "| " + name + " | " + get("Mem") + " | " + get("Syn") + " | " + get("Con") +
              " | " + get("Unseen") + " | " + total + " |\n";
    };
    for (const Row& r : rows) md_row(r.seed, r.vals);
    std::map<std::string, double> mean_vals;
    for (const auto& [k, v] : mean) mean_vals[k] = v.first / v.second;
    md_row("mean", mean_vals);
    write_file(cfg.out_dir + "/report.md", md);
}

struct SynthCliConfig {
    std::string preset = "oov";
    std::string out_dir;
    SynthConfig synth;
};

// synth: write a generated corpus bundle (train/test CoNLL, vocab, CUI file).
inline void run_synth(const SynthCliConfig& cli) {
    if (cli.out_dir.empty()) throw ConfigError("missing required option 'out'");
    SynthConfig cfg = cli.synth;
    if (cli.preset == "oov") {
        SynthConfig preset = synth_oov_preset(cfg.seed);
        preset.train_sentences = cfg.train_sentences;
        preset.test_sentences = cfg.test_sentences;
        cfg = preset;
    } else if (cli.preset == "long") {
        SynthConfig preset = synth_long_entity_preset(cfg.seed);
        preset.train_sentences = cfg.train_sentences;
        preset.test_sentences = cfg.test_sentences;
        cfg = preset;
    } else {
        throw ConfigError("unknown synth preset '" + cli.preset + "'");
    }
    SynthOutput out = generate_synthetic(cfg);
    std::filesystem::create_directories(cli.out_dir);
    write_file(cli.out_dir + "/train.conll", serialize_conll(out.train));
    write_file(cli.out_dir + "/test.conll", serialize_conll(out.test));
    write_file(cli.out_dir + "/vocab.txt", vocab_to_text(out.vocab));
    write_file(cli.out_dir + "/cui.tsv", cui_map_to_text(out.cui_map));
}

}  // namespace nerbias
