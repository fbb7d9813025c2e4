#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "nerbias/common.hpp"

namespace nerbias {

// One tagged sentence: the input sequence and its BIO labels, same length.
struct Sentence {
    std::vector<std::string> words;
    std::vector<std::string> tags;

    bool operator==(const Sentence&) const = default;
};

using Dataset = std::vector<Sentence>;

// A gold mention: inclusive word indices plus the entity type and the
// space-joined surface form.
struct EntitySpan {
    int start = 0;
    int end = 0;
    std::string etype;
    std::string surface;

    bool operator==(const EntitySpan&) const = default;
};

struct BioViolation {
    size_t index;
    std::string tag;
};

inline bool tag_shape_ok(std::string_view tag) {
    if (tag == "O") return true;
    if (tag.size() < 3) return false;
    if (tag[0] != 'B' && tag[0] != 'I') return false;
    return tag[1] == '-';
}

inline std::string_view tag_type(std::string_view tag) {
    return tag == "O" ? std::string_view{} : tag.substr(2);
}

// CoNLL column format: one token per line, first column the word, last
// column the tag; middle columns are ignored. Blank lines separate
// sentences, -DOCSTART- lines are skipped.
inline Dataset parse_conll(std::string_view text) {
    Dataset out;
    Sentence cur;
    size_t line_no = 0;
    size_t pos = 0;
    auto flush = [&] {
        if (!cur.words.empty()) {
            out.push_back(std::move(cur));
            cur = Sentence{};
        }
    };
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        ++line_no;
        pos = eol + 1;
        auto cols = split_whitespace(line);
        if (cols.empty()) {
            flush();
            if (pos > text.size()) break;
            continue;
        }
        if (cols[0].rfind("-DOCSTART-", 0) == 0) continue;
        if (cols.size() < 2)
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected at least 2 columns, got 1");
        const std::string& tag = cols.back();
        if (!tag_shape_ok(tag))
            throw TagError("line " + std::to_string(line_no) + ": bad tag '" + tag + "'");
        cur.words.push_back(cols.front());
        cur.tags.push_back(tag);
        if (pos > text.size()) break;
    }
    flush();
    return out;
}

// Bit-exact writer: single space between the two columns, \n line ends,
// single blank line between sentences, trailing newline after the last
// token line.
inline std::string serialize_conll(const Dataset& data) {
    std::string out;
    for (size_t s = 0; s < data.size(); ++s) {
        if (s) out += '\n';
        const Sentence& sent = data[s];
        for (size_t i = 0; i < sent.words.size(); ++i) {
            out += sent.words[i];
            out += ' ';
            out += sent.tags[i];
            out += '\n';
        }
    }
    return out;
}

// Lists every I-tag that does not continue a same-type B/I run.
inline std::vector<BioViolation> validate_bio(const std::vector<std::string>& tags) {
    std::vector<BioViolation> out;
    for (size_t i = 0; i < tags.size(); ++i) {
        const std::string& t = tags[i];
        if (t[0] != 'I') continue;
        bool ok = i > 0 && tags[i - 1] != "O" && tag_type(tags[i - 1]) == tag_type(t);
        if (!ok) out.push_back({i, t});
    }
    return out;
}

// IOB1 -> BIO2 repair: a dangling I-<t> becomes B-<t>.
inline std::vector<std::string> repair_bio(std::vector<std::string> tags) {
    for (size_t i = 0; i < tags.size(); ++i) {
        if (tags[i][0] != 'I') continue;
        bool ok = i > 0 && tags[i - 1] != "O" && tag_type(tags[i - 1]) == tag_type(tags[i]);
        if (!ok) tags[i][0] = 'B';
    }
    return tags;
}

// Maximal B-initiated runs of one type. Assumes tags passed validation.
inline std::vector<EntitySpan> extract_spans(const std::vector<std::string>& tags,
                                             const std::vector<std::string>* words = nullptr) {
    std::vector<EntitySpan> out;
    int start = -1;
    std::string_view etype;
    auto close = [&](int end) {
        if (start < 0) return;
        EntitySpan sp;
        sp.start = start;
        sp.end = end;
        sp.etype = std::string(etype);
        if (words) {
            for (int k = start; k <= end; ++k) {
                if (k > start) sp.surface += ' ';
                sp.surface += (*words)[k];
            }
        }
        out.push_back(std::move(sp));
        start = -1;
    };
    for (size_t i = 0; i < tags.size(); ++i) {
        const std::string& t = tags[i];
        if (t == "O") {
            close(static_cast<int>(i) - 1);
        } else if (t[0] == 'B') {
            close(static_cast<int>(i) - 1);
            start = static_cast<int>(i);
            etype = tag_type(t);
        } else {  // I-
            if (start < 0 || tag_type(t) != etype) {
                // dangling I handled like B when repair was skipped upstream
                close(static_cast<int>(i) - 1);
                start = static_cast<int>(i);
                etype = tag_type(t);
            }
        }
    }
    close(static_cast<int>(tags.size()) - 1);
    return out;
}

inline std::vector<EntitySpan> extract_spans(const Sentence& sent) {
    return extract_spans(sent.tags, &sent.words);
}

struct CorpusStats {
    size_t sentence_count = 0;
    size_t positive_count = 0;  // B/I tokens
    size_t negative_count = 0;  // O tokens
    double ratio = 0.0;         // negative / positive, inf when positive == 0
};

inline CorpusStats corpus_stats(const Dataset& data) {
    CorpusStats st;
    st.sentence_count = data.size();
    for (const Sentence& s : data)
        for (const std::string& t : s.tags)
            (t == "O" ? st.negative_count : st.positive_count)++;
    st.ratio = st.positive_count == 0
                   ? std::numeric_limits<double>::infinity()
                   : static_cast<double>(st.negative_count) / static_cast<double>(st.positive_count);
    return st;
}

// Splits sentences longer than max_len. The cut point is the rightmost O
// token at index < max_len so no entity is ever bisected; a window with no
// O token is an error.
inline Dataset split_long_sentences(const Dataset& data, size_t max_len) {
    Dataset out;
    for (const Sentence& s : data) {
        Sentence rest = s;
        while (rest.words.size() > max_len) {
            size_t cut = max_len;  // exclusive end of the first part
            while (cut > 0 && rest.tags[cut - 1] != "O") --cut;
            if (cut == 0)
                throw ParseError("cannot split sentence of length " +
                                 std::to_string(rest.words.size()) +
                                 ": no O token in the first " + std::to_string(max_len) +
                                 " positions");
            Sentence head;
            head.words.assign(rest.words.begin(), rest.words.begin() + cut);
            head.tags.assign(rest.tags.begin(), rest.tags.begin() + cut);
            out.push_back(std::move(head));
            rest.words.erase(rest.words.begin(), rest.words.begin() + cut);
            rest.tags.erase(rest.tags.begin(), rest.tags.begin() + cut);
        }
        if (!rest.words.empty()) out.push_back(std::move(rest));
    }
    return out;
}

}  // namespace nerbias
