#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nerbias/bias.hpp"
#include "nerbias/common.hpp"
#include "nerbias/ensemble.hpp"
#include "nerbias/tagger.hpp"

namespace nerbias {

// Flat key = value configuration. Every key can come from a config file or a
// command-line flag; flags win. Environment variables are never consulted.
struct RunConfig {
    std::string train_path;
    std::string test_path;
    std::string vocab_path;
    std::string cui_path;  // optional
    std::string out_dir;
    std::string resume_path;  // optional

    BiasKind bias_kind = BiasKind::pmi;
    double smoothing_k = 100.0;
    double alpha = 1.0;
    double lambda = 0.0;
    LengthUnit length_unit = LengthUnit::words;
    bool class_collapse = false;
    bool vocab_lowercase = false;
    bool dict_lowercase = false;
    std::string unk_piece = "[UNK]";
    int max_sentence_len = 0;  // 0 disables splitting

    TaggerConfig tagger;
    EnsembleMode mode = EnsembleMode::none;
    double entropy_weight = 0.2;

    std::vector<uint64_t> seeds = {1};

    void validate_for(const std::string& command) const {
        auto need = [&](const std::string& v, const char* key) {
            if (v.empty()) throw ConfigError("missing required option '" + std::string(key) + "'");
            if (!std::filesystem::exists(v))
                throw ConfigError(std::string(key) + ": file not found: " + v);
        };
        if (out_dir.empty()) throw ConfigError("missing required option 'out'");
        if (command == "stats") {
            need(train_path, "train");
            need(vocab_path, "vocab");
        } else if (command == "partition") {
            need(train_path, "train");
            need(test_path, "test");
            if (!cui_path.empty()) need(cui_path, "cui");
        } else if (command == "train") {
            need(train_path, "train");
            need(vocab_path, "vocab");
            if (seeds.empty()) throw ConfigError("seed list must be nonempty");
            if (!resume_path.empty()) {
                need(resume_path, "resume");
                if (seeds.size() != 1)
                    throw ConfigError("resume requires exactly one seed");
            }
        } else if (command == "eval") {
            need(train_path, "train");
            need(test_path, "test");
            need(vocab_path, "vocab");
            if (!cui_path.empty()) need(cui_path, "cui");
            if (seeds.empty()) throw ConfigError("seed list must be nonempty");
        } else if (command == "report") {
            if (seeds.empty()) throw ConfigError("seed list must be nonempty");
        }
        if (lambda < 0) throw ConfigError("lambda must be >= 0");
        if (smoothing_k <= 0) throw ConfigError("smoothing_k must be > 0");
        if (entropy_weight < 0) throw ConfigError("entropy_weight must be >= 0");
    }
};

inline std::vector<uint64_t> parse_seed_list(const std::string& text) {
    std::vector<uint64_t> out;
    size_t start = 0;
    while (start <= text.size()) {
        size_t comma = text.find(',', start);
        std::string item = comma == std::string::npos ? text.substr(start)
                                                      : text.substr(start, comma - start);
        if (!item.empty()) out.push_back(static_cast<uint64_t>(parse_int(item, "seeds")));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ConfigError("seeds: empty list");
    return out;
}

inline LengthUnit length_unit_from_name(std::string_view s) {
    if (s == "words") return LengthUnit::words;
    if (s == "subwords") return LengthUnit::subwords;
    throw ConfigError("unknown length_unit '" + std::string(s) + "'");
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "train") cfg.train_path = value;
    else if (key == "test") cfg.test_path = value;
    else if (key == "vocab") cfg.vocab_path = value;
    else if (key == "cui") cfg.cui_path = value;
    else if (key == "out") cfg.out_dir = value;
    else if (key == "resume") cfg.resume_path = value;
    else if (key == "bias_kind") cfg.bias_kind = bias_kind_from_name(value);
    else if (key == "smoothing_k") cfg.smoothing_k = parse_double(value, key);
    else if (key == "alpha") cfg.alpha = parse_double(value, key);
    else if (key == "lambda") cfg.lambda = parse_double(value, key);
    else if (key == "length_unit") cfg.length_unit = length_unit_from_name(value);
    else if (key == "class_collapse") cfg.class_collapse = parse_bool(value, key);
    else if (key == "vocab_lowercase") cfg.vocab_lowercase = parse_bool(value, key);
    else if (key == "dict_lowercase") cfg.dict_lowercase = parse_bool(value, key);
    else if (key == "unk_piece") cfg.unk_piece = value;
    else if (key == "max_sentence_len") cfg.max_sentence_len = static_cast<int>(parse_int(value, key));
    else if (key == "embed_dim") cfg.tagger.embed_dim = static_cast<int>(parse_int(value, key));
    else if (key == "hidden_dim") cfg.tagger.hidden_dim = static_cast<int>(parse_int(value, key));
    else if (key == "context_window") cfg.tagger.context_window = static_cast<int>(parse_int(value, key));
    else if (key == "decoder") cfg.tagger.decoder = decoder_from_name(value);
    else if (key == "optimizer") cfg.tagger.optimizer = optimizer_from_name(value);
    else if (key == "learning_rate") cfg.tagger.learning_rate = parse_double(value, key);
    else if (key == "epochs") cfg.tagger.epochs = static_cast<int>(parse_int(value, key));
    else if (key == "batch_size") cfg.tagger.batch_size = static_cast<int>(parse_int(value, key));
    else if (key == "mode") cfg.mode = ensemble_mode_from_name(value);
    else if (key == "entropy_weight") cfg.entropy_weight = parse_double(value, key);
    else if (key == "seeds") cfg.seeds = parse_seed_list(value);
    else throw ConfigError("unknown config key '" + key + "'");
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
    std::string text = read_file(path);
    size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](const std::string& s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + " line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        try {
            apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

// The effective configuration, echoed into the output directory.
inline std::string resolved_config_text(const RunConfig& cfg) {
    std::string out;
    auto kv = [&](const char* k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("train", cfg.train_path);
    kv("test", cfg.test_path);
    kv("vocab", cfg.vocab_path);
    kv("cui", cfg.cui_path);
    kv("out", cfg.out_dir);
    kv("resume", cfg.resume_path);
    kv("bias_kind", bias_kind_name(cfg.bias_kind));
    kv("smoothing_k", format_exact(cfg.smoothing_k));
    kv("alpha", format_exact(cfg.alpha));
    kv("lambda", format_exact(cfg.lambda));
    kv("length_unit", cfg.length_unit == LengthUnit::words ? "words" : "subwords");
    kv("class_collapse", cfg.class_collapse ? "true" : "false");
    kv("vocab_lowercase", cfg.vocab_lowercase ? "true" : "false");
    kv("dict_lowercase", cfg.dict_lowercase ? "true" : "false");
    kv("unk_piece", cfg.unk_piece);
    kv("max_sentence_len", std::to_string(cfg.max_sentence_len));
    kv("embed_dim", std::to_string(cfg.tagger.embed_dim));
    kv("hidden_dim", std::to_string(cfg.tagger.hidden_dim));
    kv("context_window", std::to_string(cfg.tagger.context_window));
    kv("decoder", decoder_name(cfg.tagger.decoder));
    kv("optimizer", optimizer_name(cfg.tagger.optimizer));
    kv("learning_rate", format_exact(cfg.tagger.learning_rate));
    kv("epochs", std::to_string(cfg.tagger.epochs));
    kv("batch_size", std::to_string(cfg.tagger.batch_size));
    kv("mode", ensemble_mode_name(cfg.mode));
    kv("entropy_weight", format_exact(cfg.entropy_weight));
    std::string seeds;
    for (size_t i = 0; i < cfg.seeds.size(); ++i) {
        if (i) seeds += ',';
        seeds += std::to_string(cfg.seeds[i]);
    }
    kv("seeds", seeds);
    return out;
}

inline std::string config_hash(const RunConfig& cfg) {
    return hex64(fnv1a64(resolved_config_text(cfg)));
}

}  // namespace nerbias
