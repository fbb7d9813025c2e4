#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"

namespace nerbias {

// Synthetic bias-injection corpora.
//
// The oov preset plants two surface correlations in the training split:
// cue words that precede entities, and shared root pieces that occur only
// as standalone O words. Test-side entities reuse those shared roots with
// an entity-forming suffix, so their surfaces are unseen while their pieces
// carry misleading O statistics. The long preset builds entities of 1..10
// words whose interior connectors also occur pervasively as O tokens.
struct SynthConfig {
    uint64_t seed = 1;
    int train_sentences = 2000;
    int test_sentences = 500;

    int train_roots = 100;
    int shared_roots = 5;
    int filler_words = 30;
    int suffixes = 3;
    int cue_words = 4;

    double entity_rate = 0.12;
    int max_entity_words = 2;
    double cue_rate = 0.25;
    double cue_noise_rate = 0.02;
    double shared_standalone_rate = 0.45;
    double test_unseen_frac = 0.5;

    // frequent entities recur: a hot set dominates the train distribution and
    // supplies the test-side Mem mentions
    int hot_surfaces = 20;
    double hot_rate = 0.9;

    int min_sentence_words = 6;
    int max_sentence_words = 14;

    bool long_entities = false;
    int max_entity_len = 10;
    int connector_words = 4;
    double connector_o_rate = 0.20;
};

inline SynthConfig synth_oov_preset(uint64_t seed = 1) {
    SynthConfig cfg;
    cfg.seed = seed;
    return cfg;
}

// The long preset dilutes the shared-piece trap: its subject is interior
// positions of long entities, not unseen-surface recall.
inline SynthConfig synth_long_entity_preset(uint64_t seed = 1) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.long_entities = true;
    cfg.entity_rate = 0.10;
    cfg.min_sentence_words = 8;
    cfg.max_sentence_words = 18;
    cfg.test_unseen_frac = 0.2;
    cfg.shared_roots = 16;
    cfg.shared_standalone_rate = 0.10;
    cfg.hot_surfaces = 0;
    return cfg;
}

struct SynthOutput {
    Dataset train;
    Dataset test;
    std::vector<std::string> vocab;
    std::map<std::string, std::string> cui_map;
};

namespace detail {

inline std::string two_digits(int k) {
    std::string s = std::to_string(k);
    return s.size() < 2 ? "0" + s : s;
}

struct SynthPools {
    std::vector<std::string> fillers, shared, train_roots, cues, connectors, suffix_bodies;

    explicit SynthPools(const SynthConfig& cfg) {
        for (int i = 0; i < cfg.filler_words; ++i) fillers.push_back("fill" + two_digits(i));
        for (int i = 0; i < cfg.shared_roots; ++i) shared.push_back("sh" + two_digits(i));
        for (int i = 0; i < cfg.train_roots; ++i) train_roots.push_back("tr" + two_digits(i));
        for (int i = 0; i < cfg.cue_words; ++i) cues.push_back("cue" + two_digits(i));
        for (int i = 0; i < cfg.connector_words; ++i) connectors.push_back("con" + two_digits(i));
        for (int i = 0; i < cfg.suffixes; ++i) suffix_bodies.push_back("ex" + std::to_string(i));
    }

    std::vector<std::string> vocab_pieces() const {
        std::vector<std::string> v = {"[UNK]"};
        v.insert(v.end(), fillers.begin(), fillers.end());
        v.insert(v.end(), shared.begin(), shared.end());
        v.insert(v.end(), train_roots.begin(), train_roots.end());
        v.insert(v.end(), cues.begin(), cues.end());
        v.insert(v.end(), connectors.begin(), connectors.end());
        for (const auto& s : suffix_bodies) v.push_back("##" + s);
        return v;
    }
};

}  // namespace detail

inline SynthOutput generate_synthetic(const SynthConfig& cfg) {
    Rng rng(cfg.seed);
    detail::SynthPools pools(cfg);
    SynthOutput out;
    out.vocab = pools.vocab_pieces();

    auto entity_word = [&](const std::vector<std::string>& roots) {
        return rng.pick(roots) + rng.pick(pools.suffix_bodies);
    };

    // entity surfaces as word lists
    auto train_surface = [&]() {
        std::vector<std::string> words;
        if (cfg.long_entities) {
            // lengths 1..max with extra mass on 1-2 and on the long tail
            static const double weights[] = {0.30, 0.14, 0.10, 0.08, 0.07,
                                             0.06, 0.05, 0.08, 0.06, 0.06};
            double r = rng.uniform(), acc = 0.0;
            int len = 1;
            for (int i = 0; i < cfg.max_entity_len && i < 10; ++i) {
                acc += weights[i];
                if (r < acc) {
                    len = i + 1;
                    break;
                }
                len = i + 1;
            }
            for (int i = 0; i < len; ++i) {
                bool connector = (i % 2 == 1) && i != len - 1;
                words.push_back(connector ? rng.pick(pools.connectors)
                                          : entity_word(pools.train_roots));
            }
        } else {
            int len = 1 + static_cast<int>(rng.uniform_int(cfg.max_entity_words));
            for (int i = 0; i < len; ++i) words.push_back(entity_word(pools.train_roots));
        }
        return words;
    };

    std::set<std::string> train_surfaces;
    std::vector<std::vector<std::string>> train_surface_list;

    std::vector<std::vector<std::string>> hot;
    for (int i = 0; i < cfg.hot_surfaces; ++i) hot.push_back(train_surface());

    auto emit_entity = [&](Sentence& s, const std::vector<std::string>& words) {
        for (size_t i = 0; i < words.size(); ++i) {
            s.words.push_back(words[i]);
            s.tags.push_back(i == 0 ? "B-X" : "I-X");
        }
    };

    auto filler_or_special = [&](bool is_train) {
        double r = rng.uniform();
        if (r < cfg.shared_standalone_rate) return rng.pick(pools.shared);
        r -= cfg.shared_standalone_rate;
        if (cfg.long_entities && r < cfg.connector_o_rate) return rng.pick(pools.connectors);
        if (cfg.long_entities) r -= cfg.connector_o_rate;
        double cue_bg = is_train ? cfg.cue_noise_rate
                                 : cfg.cue_noise_rate + cfg.cue_rate * cfg.entity_rate;
        if (r < cue_bg) return rng.pick(pools.cues);
        return rng.pick(pools.fillers);
    };

    auto make_sentence = [&](bool is_train) {
        Sentence s;
        int target = cfg.min_sentence_words +
                     static_cast<int>(rng.uniform_int(
                         static_cast<uint64_t>(cfg.max_sentence_words - cfg.min_sentence_words + 1)));
        while (static_cast<int>(s.words.size()) < target) {
            if (rng.uniform() < cfg.entity_rate) {
                std::vector<std::string> surface;
                if (is_train) {
                    surface = !hot.empty() && rng.bernoulli(cfg.hot_rate) ? rng.pick(hot)
                                                                          : train_surface();
                    std::string key = join(surface, " ");
                    if (train_surfaces.insert(key).second) train_surface_list.push_back(surface);
                    if (rng.bernoulli(cfg.cue_rate)) {
                        s.words.push_back(rng.pick(pools.cues));
                        s.tags.push_back("O");
                    }
                } else if (!train_surface_list.empty() &&
                           !rng.bernoulli(cfg.test_unseen_frac)) {
                    // Mem mentions follow the training frequency profile
                    if (!hot.empty() && rng.bernoulli(cfg.hot_rate)) {
                        const auto& pick = rng.pick(hot);
                        surface = train_surfaces.count(join(pick, " "))
                                      ? pick
                                      : train_surface_list[rng.uniform_int(train_surface_list.size())];
                    } else {
                        surface = train_surface_list[rng.uniform_int(train_surface_list.size())];
                    }
                } else {
                    // unseen surface: shared roots with entity suffixes
                    if (cfg.long_entities) {
                        surface = train_surface();
                        for (auto& w : surface)
                            if (w.rfind("con", 0) != 0) w = entity_word(pools.shared);
                    } else {
                        int len = 1 + static_cast<int>(rng.uniform_int(cfg.max_entity_words));
                        for (int i = 0; i < len; ++i)
                            surface.push_back(entity_word(pools.shared));
                    }
                }
                emit_entity(s, surface);
            } else {
                s.words.push_back(filler_or_special(is_train));
                s.tags.push_back("O");
            }
        }
        return s;
    };

    for (int i = 0; i < cfg.train_sentences; ++i) out.train.push_back(make_sentence(true));
    for (int i = 0; i < cfg.test_sentences; ++i) out.test.push_back(make_sentence(false));

    // concept ids: every train surface gets its own; unseen test surfaces are
    // synonyms of some train concept half the time, new concepts otherwise
    std::map<std::string, std::string> surface_cui;
    int next_cui = 0;
    for (const auto& words : train_surface_list)
        surface_cui[join(words, " ")] = "C" + std::to_string(next_cui++);
    for (const Sentence& s : out.test) {
        for (const EntitySpan& sp : extract_spans(s)) {
            if (surface_cui.count(sp.surface)) continue;
            if (!train_surface_list.empty() && rng.bernoulli(0.5)) {
                const auto& twin = train_surface_list[rng.uniform_int(train_surface_list.size())];
                surface_cui[sp.surface] = surface_cui[join(twin, " ")];
            } else {
                surface_cui[sp.surface] = "C" + std::to_string(next_cui++);
            }
        }
    }
    out.cui_map = std::move(surface_cui);
    return out;
}

inline std::string vocab_to_text(const std::vector<std::string>& pieces) {
    std::string out;
    for (const auto& p : pieces) {
        out += p;
        out += '\n';
    }
    return out;
}

inline std::string cui_map_to_text(const std::map<std::string, std::string>& m) {
    std::string out;
    for (const auto& [surface, cui] : m) {
        out += surface;
        out += '\t';
        out += cui;
        out += '\n';
    }
    return out;
}

}  // namespace nerbias
