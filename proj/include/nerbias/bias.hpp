#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"
#include "nerbias/tokenizer.hpp"

namespace nerbias {

// The class axis of every table: the full BIO tag set of the training
// split, or the collapsed {B, I, O} variant.
class ClassSet {
public:
    ClassSet(std::vector<std::string> names, bool collapsed)
        : names_(std::move(names)), collapsed_(collapsed) {
        for (size_t i = 0; i < names_.size(); ++i) index_[names_[i]] = static_cast<int>(i);
    }

    static ClassSet from_dataset(const Dataset& data, bool collapsed = false) {
        if (collapsed) return ClassSet({"B", "I", "O"}, true);
        std::set<std::string> tags;
        for (const Sentence& s : data) tags.insert(s.tags.begin(), s.tags.end());
        return ClassSet(std::vector<std::string>(tags.begin(), tags.end()), false);
    }

    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    bool collapsed() const { return collapsed_; }

    int class_of_tag(std::string_view tag) const {
        std::string key = collapsed_ ? std::string(1, tag[0]) : std::string(tag);
        auto it = index_.find(key);
        if (it == index_.end())
            throw ConfigError("tag '" + std::string(tag) + "' not in training class set");
        return it->second;
    }

    bool operator==(const ClassSet& other) const {
        return names_ == other.names_ && collapsed_ == other.collapsed_;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    bool collapsed_ = false;
};

// Raw subword-class co-occurrence counts n(s,c) over the training split.
struct CountTable {
    std::vector<std::string> classes;
    std::map<std::string, std::vector<int64_t>> joint;

    int64_t total() const {
        int64_t n = 0;
        for (const auto& [_, row] : joint)
            for (int64_t v : row) n += v;
        return n;
    }
};

inline CountTable count_cooccurrence(const std::vector<TokenizedSentence>& corpus,
                                     const ClassSet& classes) {
    if (corpus.empty()) throw ConfigError("count_cooccurrence: empty corpus");
    CountTable table;
    table.classes = classes.names();
    for (const TokenizedSentence& ts : corpus) {
        for (size_t i = 0; i < ts.subwords.size(); ++i) {
            auto& row = table.joint[ts.subwords[i]];
            if (row.empty()) row.assign(classes.size(), 0);
            row[classes.class_of_tag(ts.sub_tags[i])]++;
        }
    }
    return table;
}

struct PmiTable {
    std::vector<std::string> classes;
    std::map<std::string, std::vector<double>> values;
    double smoothing_k = 100.0;
};

// PMI(s,c) = log P(s,c) / (P(s) P(c)) over the add-K smoothed joint table;
// every marginal derives from the smoothed joint so the table stays
// self-consistent. Natural log.
inline PmiTable compute_pmi(const CountTable& counts, double k = 100.0) {
    if (k <= 0) throw ConfigError("compute_pmi: K must be > 0");
    PmiTable out;
    out.classes = counts.classes;
    out.smoothing_k = k;
    const size_t C = counts.classes.size();

    double grand = 0.0;
    std::vector<double> class_mass(C, 0.0);
    for (const auto& [_, row] : counts.joint) {
        for (size_t c = 0; c < C; ++c) {
            double cell = static_cast<double>(row[c]) + k;
            grand += cell;
            class_mass[c] += cell;
        }
    }
    for (const auto& [subword, row] : counts.joint) {
        std::vector<double> pmi(C);
        double subword_mass = 0.0;
        for (size_t c = 0; c < C; ++c) subword_mass += static_cast<double>(row[c]) + k;
        double p_s = subword_mass / grand;
        for (size_t c = 0; c < C; ++c) {
            double p_sc = (static_cast<double>(row[c]) + k) / grand;
            double p_c = class_mass[c] / grand;
            pmi[c] = std::log(p_sc / (p_s * p_c));
        }
        out.values.emplace(subword, std::move(pmi));
    }
    return out;
}

// Softmax of row/T with max subtraction. T >= 1 smooths toward uniform.
inline std::vector<double> softmax_with_temperature(const std::vector<double>& row, double t) {
    std::vector<double> out(row.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) mx = std::max(mx, v / t);
    double sum = 0.0;
    for (size_t i = 0; i < row.size(); ++i) {
        out[i] = std::exp(row[i] / t - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

enum class LengthUnit { words, subwords };

struct TemperatureConfig {
    double lambda = 0.0;
    LengthUnit length_unit = LengthUnit::words;
};

// T = 1 + lambda * L for L > 1, else 1.
inline double temperature_for(int entity_len, const TemperatureConfig& cfg) {
    if (entity_len < 1) throw ConfigError("temperature_for: entity length must be >= 1");
    return entity_len > 1 ? 1.0 + cfg.lambda * entity_len : 1.0;
}

enum class BiasKind { pmi, word_freq, uniform, random };

inline std::string bias_kind_name(BiasKind k) {
    switch (k) {
        case BiasKind::pmi: return "pmi";
        case BiasKind::word_freq: return "word_freq";
        case BiasKind::uniform: return "uniform";
        case BiasKind::random: return "random";
    }
    return "?";
}

inline BiasKind bias_kind_from_name(std::string_view name) {
    if (name == "pmi") return BiasKind::pmi;
    if (name == "word_freq") return BiasKind::word_freq;
    if (name == "uniform") return BiasKind::uniform;
    if (name == "random") return BiasKind::random;
    throw ConfigError("unknown bias kind '" + std::string(name) + "'");
}

// Precomputed per-key class distributions (word-frequency, uniform and
// random baselines). PMI bias is looked up through PmiTable instead so
// temperature applies to scores, not to the normalized vector.
struct BiasTable {
    std::vector<std::string> classes;
    std::map<std::string, std::vector<double>> dist;
    BiasKind kind = BiasKind::uniform;
};

inline std::vector<double> uniform_distribution(size_t c) {
    return std::vector<double>(c, 1.0 / static_cast<double>(c));
}

// PMI lookup: softmax(PMI row / T) with T from the gold entity length;
// unknown subwords fall back to uniform.
inline std::vector<double> lookup_bias(const PmiTable& table, std::string_view subword,
                                       int entity_len, const TemperatureConfig& cfg) {
    auto it = table.values.find(std::string(subword));
    if (it == table.values.end()) return uniform_distribution(table.classes.size());
    return softmax_with_temperature(it->second, temperature_for(entity_len, cfg));
}

// Baseline-table lookup. Temperature is applied to log(dist) so T = 1
// returns the stored vector unchanged.
inline std::vector<double> lookup_bias(const BiasTable& table, std::string_view key,
                                       int entity_len, const TemperatureConfig& cfg) {
    auto it = table.dist.find(std::string(key));
    if (it == table.dist.end()) return uniform_distribution(table.classes.size());
    double t = temperature_for(entity_len, cfg);
    if (t == 1.0) return it->second;
    std::vector<double> logs(it->second.size());
    for (size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(it->second[i]);
    return softmax_with_temperature(logs, t);
}

// Word-level class-frequency baseline: dist(w,c) = (n(w,c)+a) / (n(w)+aC).
inline BiasTable word_frequency_bias(const Dataset& data, const ClassSet& classes,
                                     double alpha = 1.0) {
    BiasTable out;
    out.classes = classes.names();
    out.kind = BiasKind::word_freq;
    const size_t C = classes.size();
    std::map<std::string, std::vector<int64_t>> counts;
    for (const Sentence& s : data) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            auto& row = counts[s.words[i]];
            if (row.empty()) row.assign(C, 0);
            row[classes.class_of_tag(s.tags[i])]++;
        }
    }
    for (const auto& [word, row] : counts) {
        int64_t n = 0;
        for (int64_t v : row) n += v;
        std::vector<double> dist(C);
        for (size_t c = 0; c < C; ++c)
            dist[c] = (static_cast<double>(row[c]) + alpha) /
                      (static_cast<double>(n) + alpha * static_cast<double>(C));
        out.dist.emplace(word, std::move(dist));
    }
    return out;
}

inline BiasTable uniform_bias(const ClassSet& classes) {
    BiasTable out;
    out.classes = classes.names();
    out.kind = BiasKind::uniform;
    return out;  // empty dist: every lookup hits the uniform fallback
}

// One symmetric Dirichlet(1) draw per key, fixed seed.
inline BiasTable random_bias(const ClassSet& classes, const std::vector<std::string>& keys,
                             uint64_t seed) {
    BiasTable out;
    out.classes = classes.names();
    out.kind = BiasKind::random;
    Rng rng(seed);
    for (const std::string& key : keys) {
        std::vector<double> draw(classes.size());
        double sum = 0.0;
        for (double& v : draw) {
            v = -std::log(1.0 - rng.uniform());
            sum += v;
        }
        for (double& v : draw) v /= sum;
        out.dist.emplace(key, std::move(draw));
    }
    return out;
}

// ---------------------------------------------------------------------------
// TSV round trip. The PMI file carries the raw counts next to the PMI
// columns so the import side can rebuild the exact table from counts and K;
// the 12-digit PMI columns are cross-checked against that recomputation.

namespace detail {

inline void write_table_header(std::string& out, std::string_view kind,
                               const std::vector<std::string>& classes,
                               const std::vector<std::pair<std::string, std::string>>& meta) {
    out += "# nerbias-table v1\n";
    out += "# kind = ";
    out += kind;
    out += '\n';
    for (const auto& [k, v] : meta) {
        out += "# ";
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    out += "# classes = " + join(classes, ",") + "\n";
}

struct TableFile {
    std::map<std::string, std::string> meta;  // includes "kind"
    std::vector<std::string> classes;
    std::vector<std::string> header_cols;
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
};

inline TableFile parse_table_file(const std::string& text, const std::string& context) {
    TableFile out;
    size_t pos = 0, line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        // the comment block only precedes the header; subwords may start with '#'
        if (!header_seen && line[0] == '#') {
            std::string body = line.substr(1);
            size_t eq = body.find('=');
            if (eq != std::string::npos) {
                auto trim = [](std::string s) {
                    size_t a = s.find_first_not_of(" \t");
                    size_t b = s.find_last_not_of(" \t");
                    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
                };
                out.meta[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
            }
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
        if (!header_seen) {
            if (cols.empty() || cols[0] != "subword")
                throw FormatError(context + ": header mismatch at line " + std::to_string(line_no));
            out.header_cols = cols;
            header_seen = true;
            continue;
        }
        if (cols.size() != out.header_cols.size())
            throw FormatError(context + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(cols.size()) + " columns, expected " +
                              std::to_string(out.header_cols.size()));
        out.rows.emplace_back(cols[0], std::vector<std::string>(cols.begin() + 1, cols.end()));
    }
    if (!header_seen) throw FormatError(context + ": missing header row");
    auto it = out.meta.find("classes");
    if (it == out.meta.end()) throw FormatError(context + ": missing '# classes' line");
    size_t start = 0;
    const std::string& cls = it->second;
    while (start <= cls.size()) {
        size_t comma = cls.find(',', start);
        if (comma == std::string::npos) {
            out.classes.push_back(cls.substr(start));
            break;
        }
        out.classes.push_back(cls.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

}  // namespace detail

inline std::string export_pmi_table(const CountTable& counts, const PmiTable& pmi,
                                    double lambda = 0.0, std::string_view corpus_checksum = "") {
    std::string out;
    detail::write_table_header(out, "pmi", pmi.classes,
                               {{"k", format_exact(pmi.smoothing_k)},
                                {"lambda", format_exact(lambda)},
                                {"log_base", "e"},
                                {"corpus_checksum", std::string(corpus_checksum)}});
    out += "subword";
    for (const std::string& c : pmi.classes) out += "\t" + c;
    for (const std::string& c : pmi.classes) out += "\tn:" + c;
    out += '\n';
    for (const auto& [subword, row] : pmi.values) {
        out += subword;
        for (double v : row) out += "\t" + format_sig(v, 12);
        const auto& crow = counts.joint.at(subword);
        for (int64_t v : crow) out += "\t" + std::to_string(v);
        out += '\n';
    }
    return out;
}

struct PmiImport {
    CountTable counts;
    PmiTable pmi;
    double lambda = 0.0;
    std::string corpus_checksum;
};

inline PmiImport import_pmi_table(const std::string& text) {
    auto file = detail::parse_table_file(text, "pmi table");
    if (file.meta["kind"] != "pmi") throw FormatError("pmi table: kind mismatch");
    const size_t C = file.classes.size();
    std::vector<std::string> expect = {"subword"};
    for (const std::string& c : file.classes) expect.push_back(c);
    for (const std::string& c : file.classes) expect.push_back("n:" + c);
    if (file.header_cols != expect) throw FormatError("pmi table: header mismatch");

    PmiImport out;
    out.counts.classes = file.classes;
    out.lambda = parse_double(file.meta.at("lambda"), "pmi table lambda");
    out.corpus_checksum = file.meta.count("corpus_checksum") ? file.meta["corpus_checksum"] : "";
    double k = parse_double(file.meta.at("k"), "pmi table k");

    std::map<std::string, std::vector<double>> stored;
    for (const auto& [subword, cells] : file.rows) {
        std::vector<double> vals(C);
        std::vector<int64_t> cnts(C);
        for (size_t c = 0; c < C; ++c) vals[c] = parse_double(cells[c], "pmi table row " + subword);
        for (size_t c = 0; c < C; ++c)
            cnts[c] = parse_int(cells[C + c], "pmi table row " + subword);
        out.counts.joint.emplace(subword, std::move(cnts));
        stored.emplace(subword, std::move(vals));
    }
    out.pmi = compute_pmi(out.counts, k);
    for (const auto& [subword, row] : out.pmi.values) {
        const auto& file_row = stored.at(subword);
        for (size_t c = 0; c < C; ++c) {
            double tol = 1e-9 * std::max(1.0, std::abs(row[c]));
            if (std::abs(file_row[c] - row[c]) > tol)
                throw FormatError("pmi table: stored PMI for '" + subword +
                                  "' disagrees with counts");
        }
    }
    return out;
}

inline std::string export_bias_table(const BiasTable& table,
                                     const std::vector<std::pair<std::string, std::string>>& meta = {},
                                     std::string_view corpus_checksum = "") {
    std::string out;
    auto full_meta = meta;
    full_meta.emplace_back("corpus_checksum", std::string(corpus_checksum));
    detail::write_table_header(out, bias_kind_name(table.kind), table.classes, full_meta);
    out += "subword";
    for (const std::string& c : table.classes) out += "\t" + c;
    out += '\n';
    for (const auto& [key, row] : table.dist) {
        out += key;
        for (double v : row) out += "\t" + format_sig(v, 12);
        out += '\n';
    }
    return out;
}

inline BiasTable import_bias_table(const std::string& text) {
    auto file = detail::parse_table_file(text, "bias table");
    BiasTable out;
    out.kind = bias_kind_from_name(file.meta["kind"]);
    out.classes = file.classes;
    std::vector<std::string> expect = {"subword"};
    for (const std::string& c : file.classes) expect.push_back(c);
    if (file.header_cols != expect) throw FormatError("bias table: header mismatch");
    for (const auto& [key, cells] : file.rows) {
        std::vector<double> vals(cells.size());
        for (size_t c = 0; c < cells.size(); ++c)
            vals[c] = parse_double(cells[c], "bias table row " + key);
        out.dist.emplace(key, std::move(vals));
    }
    return out;
}

}  // namespace nerbias
