#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"

namespace nerbias {

// Fixed subword vocabulary, WordPiece-file shaped: one piece per line,
// continuation pieces carry a leading "##".
class Vocab {
public:
    Vocab(std::vector<std::string> pieces, std::string unk_piece, bool lowercase)
        : pieces_(std::move(pieces)), unk_piece_(std::move(unk_piece)), lowercase_(lowercase) {
        for (size_t i = 0; i < pieces_.size(); ++i) {
            const std::string& p = pieces_[i];
            if (p.empty()) throw FormatError("vocab: empty piece at index " + std::to_string(i));
            if (p == "##") throw FormatError("vocab: '##' alone is not a piece");
            if (!index_.emplace(p, static_cast<int>(i)).second)
                throw FormatError("vocab: duplicate piece '" + p + "'");
            std::string_view body = p;
            if (body.rfind("##", 0) == 0) body.remove_prefix(2);
            max_body_len_ = std::max(max_body_len_, body.size());
        }
        auto it = index_.find(unk_piece_);
        if (it == index_.end())
            throw ConfigError("vocab: missing unk piece '" + unk_piece_ + "'");
        unk_id_ = it->second;
    }

    size_t size() const { return pieces_.size(); }
    const std::vector<std::string>& pieces() const { return pieces_; }
    const std::string& unk_piece() const { return unk_piece_; }
    int unk_id() const { return unk_id_; }
    bool lowercase() const { return lowercase_; }

    int id_of(std::string_view piece) const {
        auto it = index_.find(std::string(piece));
        return it == index_.end() ? unk_id_ : it->second;
    }

    bool contains(std::string_view piece) const {
        return index_.count(std::string(piece)) > 0;
    }

    size_t max_body_len() const { return max_body_len_; }

private:
    std::vector<std::string> pieces_;
    std::unordered_map<std::string, int> index_;
    std::string unk_piece_;
    int unk_id_ = 0;
    bool lowercase_ = false;
    size_t max_body_len_ = 0;
};

inline Vocab load_vocab(const std::string& path, const std::string& unk_piece = "[UNK]",
                        bool lowercase = false) {
    std::string text = read_file(path);
    std::vector<std::string> pieces;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) pieces.push_back(line);
    }
    if (pieces.empty()) throw FormatError("vocab: empty file " + path);
    return Vocab(std::move(pieces), unk_piece, lowercase);
}

// Greedy longest-match from the left; the first piece is matched bare and
// continuations with the "##" prefix. Any unmatched position collapses the
// whole word to [unk].
inline std::vector<std::string> tokenize_word(const Vocab& vocab, std::string_view word) {
    std::string lowered;
    if (vocab.lowercase()) {
        lowered = lowercase_ascii(word);
        word = lowered;
    }
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < word.size()) {
        size_t max_len = std::min(vocab.max_body_len(), word.size() - pos);
        size_t match = 0;
        for (size_t len = max_len; len >= 1; --len) {
            std::string candidate;
            if (pos > 0) candidate = "##";
            candidate.append(word.substr(pos, len));
            if (vocab.contains(candidate)) {
                out.push_back(std::move(candidate));
                match = len;
                break;
            }
        }
        if (match == 0) return {vocab.unk_piece()};
        pos += match;
    }
    return out;
}

// A sentence at subword granularity. entity_len holds the word-length of
// the gold entity covering each subword's source word (1 outside spans);
// entity_len_sub is the same span measured in subwords.
struct TokenizedSentence {
    std::vector<std::string> subwords;
    std::vector<int> ids;
    std::vector<std::string> sub_tags;
    std::vector<int> word_index;
    std::vector<int> entity_len;
    std::vector<int> entity_len_sub;
};

// Every subword inherits its word's tag, except that continuations of a
// B-tagged word are demoted to I so subword tag sequences stay well-formed.
inline TokenizedSentence align_labels(const Vocab& vocab, const Sentence& sent) {
    TokenizedSentence out;
    std::vector<std::vector<std::string>> word_pieces(sent.words.size());
    for (size_t w = 0; w < sent.words.size(); ++w)
        word_pieces[w] = tokenize_word(vocab, sent.words[w]);

    auto spans = extract_spans(sent.tags);
    std::vector<int> span_of_word(sent.words.size(), -1);
    for (size_t k = 0; k < spans.size(); ++k)
        for (int w = spans[k].start; w <= spans[k].end; ++w) span_of_word[w] = static_cast<int>(k);
    std::vector<int> span_sub_len(spans.size(), 0);
    for (size_t w = 0; w < sent.words.size(); ++w)
        if (span_of_word[w] >= 0) span_sub_len[span_of_word[w]] += static_cast<int>(word_pieces[w].size());

    for (size_t w = 0; w < sent.words.size(); ++w) {
        const std::string& tag = sent.tags[w];
        int sp = span_of_word[w];
        int len_words = sp < 0 ? 1 : spans[sp].end - spans[sp].start + 1;
        int len_subs = sp < 0 ? 1 : span_sub_len[sp];
        for (size_t k = 0; k < word_pieces[w].size(); ++k) {
            out.subwords.push_back(word_pieces[w][k]);
            out.ids.push_back(vocab.id_of(word_pieces[w][k]));
            if (k == 0 || tag == "O")
                out.sub_tags.push_back(tag);
            else
                out.sub_tags.push_back("I-" + std::string(tag_type(tag)));
            out.word_index.push_back(static_cast<int>(w));
            out.entity_len.push_back(len_words);
            out.entity_len_sub.push_back(len_subs);
        }
    }
    return out;
}

inline std::vector<TokenizedSentence> tokenize_dataset(const Vocab& vocab, const Dataset& data) {
    std::vector<TokenizedSentence> out;
    out.reserve(data.size());
    for (const Sentence& s : data) out.push_back(align_labels(vocab, s));
    return out;
}

}  // namespace nerbias
