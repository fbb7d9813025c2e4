#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"

namespace nerbias {

// Training-side dictionaries. Entity keys are typed (type TAB surface) so a
// surface seen under one type never matches another; the CUI map is keyed by
// surface alone, matching the side-file format.
struct PartitionDicts {
    std::set<std::string> entity_dict;   // E_tr
    std::set<std::string> concept_dict;  // C_tr
    std::map<std::string, std::string> cui_map;
    bool has_cui = false;
    bool lowercase = false;

    std::string normalize(std::string_view surface) const {
        return lowercase ? lowercase_ascii(surface) : std::string(surface);
    }
    std::string entity_key(std::string_view etype, std::string_view surface) const {
        return std::string(etype) + "\t" + normalize(surface);
    }
};

// Side file: surface TAB CUI, one pair per line; duplicate surfaces must
// agree on the CUI.
inline std::map<std::string, std::string> load_cui_map(const std::string& text) {
    std::map<std::string, std::string> out;
    size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
            throw FormatError("cui file line " + std::to_string(line_no) +
                              ": expected 'surface<TAB>CUI'");
        std::string surface = line.substr(0, tab);
        std::string cui = line.substr(tab + 1);
        auto [it, inserted] = out.emplace(surface, cui);
        if (!inserted && it->second != cui)
            throw FormatError("cui file line " + std::to_string(line_no) + ": surface '" +
                              surface + "' maps to both '" + it->second + "' and '" + cui + "'");
    }
    return out;
}

inline PartitionDicts build_dicts(const Dataset& train,
                                  const std::map<std::string, std::string>* cui_map = nullptr,
                                  bool lowercase = false) {
    PartitionDicts dicts;
    dicts.lowercase = lowercase;
    if (cui_map) {
        dicts.has_cui = true;
        for (const auto& [surface, cui] : *cui_map)
            dicts.cui_map.emplace(dicts.normalize(surface), cui);
    }
    for (const Sentence& sent : train) {
        for (const EntitySpan& span : extract_spans(sent)) {
            dicts.entity_dict.insert(dicts.entity_key(span.etype, span.surface));
            if (dicts.has_cui) {
                auto it = dicts.cui_map.find(dicts.normalize(span.surface));
                if (it != dicts.cui_map.end()) dicts.concept_dict.insert(it->second);
            }
        }
    }
    return dicts;
}

enum class MentionSet { Mem, Unseen, Syn, Con };

inline std::string mention_set_name(MentionSet s) {
    switch (s) {
        case MentionSet::Mem: return "Mem";
        case MentionSet::Unseen: return "Unseen";
        case MentionSet::Syn: return "Syn";
        case MentionSet::Con: return "Con";
    }
    return "?";
}

struct PartitionedMention {
    size_t sentence = 0;
    EntitySpan span;
    MentionSet set = MentionSet::Mem;
};

struct PartitionCounts {
    size_t mem = 0, unseen = 0, syn = 0, con = 0;
    size_t total() const { return mem + unseen + syn + con; }
};

// Mem if the typed surface is in E_tr; otherwise Syn/Con by concept overlap
// when CUIs are available, else Unseen. An unseen mention with no CUI entry
// falls into Con.
inline std::vector<PartitionedMention> partition_mentions(const Dataset& eval,
                                                          const PartitionDicts& dicts) {
    std::vector<PartitionedMention> out;
    for (size_t s = 0; s < eval.size(); ++s) {
        for (const EntitySpan& span : extract_spans(eval[s])) {
            PartitionedMention m;
            m.sentence = s;
            m.span = span;
            if (dicts.entity_dict.count(dicts.entity_key(span.etype, span.surface))) {
                m.set = MentionSet::Mem;
            } else if (!dicts.has_cui) {
                m.set = MentionSet::Unseen;
            } else {
                auto it = dicts.cui_map.find(dicts.normalize(span.surface));
                bool syn = it != dicts.cui_map.end() && dicts.concept_dict.count(it->second) > 0;
                m.set = syn ? MentionSet::Syn : MentionSet::Con;
            }
            out.push_back(std::move(m));
        }
    }
    return out;
}

inline PartitionCounts partition_counts(const std::vector<PartitionedMention>& mentions) {
    PartitionCounts c;
    for (const auto& m : mentions) {
        switch (m.set) {
            case MentionSet::Mem: ++c.mem; break;
            case MentionSet::Unseen: ++c.unseen; break;
            case MentionSet::Syn: ++c.syn; break;
            case MentionSet::Con: ++c.con; break;
        }
    }
    return c;
}

}  // namespace nerbias
