#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"
#include "nerbias/partition.hpp"

namespace nerbias {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    size_t tp = 0, fp = 0, fn = 0;
};

inline Prf prf_from_counts(size_t tp, size_t fp, size_t fn) {
    Prf m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.f1 = m.precision + m.recall == 0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

namespace detail {
using SpanKey = std::tuple<int, int, std::string>;  // start, end, type

inline std::set<SpanKey> span_set(const std::vector<EntitySpan>& spans) {
    std::set<SpanKey> out;
    for (const EntitySpan& s : spans) out.emplace(s.start, s.end, s.etype);
    return out;
}
}  // namespace detail

// Entity-level micro P/R/F1 under the exact-match criterion (boundary and
// type). Duplicate spans within a sentence collapse: predictions form a set.
inline Prf entity_prf(const std::vector<std::vector<EntitySpan>>& gold,
                      const std::vector<std::vector<EntitySpan>>& pred) {
    if (gold.size() != pred.size()) throw ConfigError("entity_prf: corpus size mismatch");
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t s = 0; s < gold.size(); ++s) {
        auto g = detail::span_set(gold[s]);
        auto p = detail::span_set(pred[s]);
        for (const auto& key : p) (g.count(key) ? tp : fp)++;
        for (const auto& key : g) fn += p.count(key) ? 0 : 1;
    }
    return prf_from_counts(tp, fp, fn);
}

struct SetRecall {
    size_t matched = 0;
    size_t total = 0;
    double recall() const { return static_cast<double>(matched) / static_cast<double>(total); }
};

// Recall of each partitioned mention set; empty sets are reported as absent.
inline std::map<MentionSet, SetRecall> partition_recall(
    const std::vector<PartitionedMention>& mentions,
    const std::vector<std::vector<EntitySpan>>& pred) {
    std::map<MentionSet, SetRecall> out;
    std::vector<std::set<detail::SpanKey>> pred_sets(pred.size());
    for (size_t s = 0; s < pred.size(); ++s) pred_sets[s] = detail::span_set(pred[s]);
    for (const PartitionedMention& m : mentions) {
        SetRecall& r = out[m.set];
        ++r.total;
        if (m.sentence < pred_sets.size() &&
            pred_sets[m.sentence].count({m.span.start, m.span.end, m.span.etype}))
            ++r.matched;
    }
    return out;
}

// Corpus-level unique (lowercased surface, type) sets, then set P/R/F1.
inline Prf surface_form_prf(const std::vector<std::vector<EntitySpan>>& gold,
                            const std::vector<std::vector<EntitySpan>>& pred) {
    std::set<std::pair<std::string, std::string>> g, p;
    for (const auto& sent : gold)
        for (const EntitySpan& s : sent) g.emplace(lowercase_ascii(s.surface), s.etype);
    for (const auto& sent : pred)
        for (const EntitySpan& s : sent) p.emplace(lowercase_ascii(s.surface), s.etype);
    size_t tp = 0;
    for (const auto& key : p) tp += g.count(key);
    return prf_from_counts(tp, p.size() - tp, g.size() - tp);
}

constexpr int kLengthBuckets = 8;  // 1..7 words and >= 8

inline int length_bucket(int word_count) {
    return word_count >= kLengthBuckets ? kLengthBuckets - 1 : word_count - 1;
}

inline std::string length_bucket_name(int bucket) {
    return bucket == kLengthBuckets - 1 ? ">=8" : std::to_string(bucket + 1);
}

// Micro P/R/F1 per entity-length bucket. Matched and missed gold spans are
// bucketed by gold length, false positives by the predicted span's length.
inline std::array<Prf, kLengthBuckets> length_bucketed_prf(
    const std::vector<std::vector<EntitySpan>>& gold,
    const std::vector<std::vector<EntitySpan>>& pred) {
    if (gold.size() != pred.size()) throw ConfigError("length_bucketed_prf: corpus size mismatch");
    std::array<size_t, kLengthBuckets> tp{}, fp{}, fn{};
    for (size_t s = 0; s < gold.size(); ++s) {
        auto g = detail::span_set(gold[s]);
        auto p = detail::span_set(pred[s]);
        for (const auto& key : p) {
            int b = length_bucket(std::get<1>(key) - std::get<0>(key) + 1);
            (g.count(key) ? tp[b] : fp[b])++;
        }
        for (const auto& key : g) {
            if (!p.count(key)) fn[length_bucket(std::get<1>(key) - std::get<0>(key) + 1)]++;
        }
    }
    std::array<Prf, kLengthBuckets> out;
    for (int b = 0; b < kLengthBuckets; ++b) out[b] = prf_from_counts(tp[b], fp[b], fn[b]);
    return out;
}

struct EvalReport {
    Prf total;
    std::map<MentionSet, SetRecall> partition;
    Prf surface;
    std::array<Prf, kLengthBuckets> buckets;
};

inline EvalReport build_report(const std::vector<std::vector<EntitySpan>>& gold,
                               const std::vector<std::vector<EntitySpan>>& pred,
                               const std::vector<PartitionedMention>& mentions) {
    EvalReport rep;
    rep.total = entity_prf(gold, pred);
    rep.partition = partition_recall(mentions, pred);
    rep.surface = surface_form_prf(gold, pred);
    rep.buckets = length_bucketed_prf(gold, pred);
    return rep;
}

inline std::string report_to_tsv(const EvalReport& rep) {
    std::string out = "metric\tprecision\trecall\tf1\tsupport\n";
    auto prf_row = [&](std::string_view name, const Prf& m, size_t support) {
        out += std::string(name) + "\t" + format_sig(m.precision, 12) + "\t" +
               format_sig(m.recall, 12) + "\t" + format_sig(m.f1, 12) + "\t" +
               std::to_string(support) + "\n";
    };
    prf_row("total", rep.total, rep.total.tp + rep.total.fn);
    for (const auto& [set, r] : rep.partition)
        out += mention_set_name(set) + "\t-\t" + format_sig(r.recall(), 12) + "\t-\t" +
               std::to_string(r.total) + "\n";
    prf_row("surface", rep.surface, rep.surface.tp + rep.surface.fn);
    for (int b = 0; b < kLengthBuckets; ++b)
        prf_row("len_" + length_bucket_name(b), rep.buckets[b],
                rep.buckets[b].tp + rep.buckets[b].fn);
    return out;
}

inline std::string report_to_markdown(const EvalReport& rep) {
    auto pct = [](double v) { return format_sig(100.0 * v, 4); };
    std::string out;
    out += "| metric | P | R | F1 | support |\n|---|---|---|---|---|\n";
    out += "| total | " + pct(rep.total.precision) + " | " + pct(rep.total.recall) + " | " +
           pct(rep.total.f1) + " | " + std::to_string(rep.total.tp + rep.total.fn) + " |\n";
    for (const auto& [set, r] : rep.partition)
        out += "| " + mention_set_name(set) + " (R) | - | " + pct(r.recall()) + " | - | " +
               std::to_string(r.total) + " |\n";
    out += "| surface | " + pct(rep.surface.precision) + " | " + pct(rep.surface.recall) + " | " +
           pct(rep.surface.f1) + " | " + std::to_string(rep.surface.tp + rep.surface.fn) + " |\n";
    for (int b = 0; b < kLengthBuckets; ++b) {
        const Prf& m = rep.buckets[b];
        out += "| len " + length_bucket_name(b) + " | " + pct(m.precision) + " | " +
               pct(m.recall) + " | " + pct(m.f1) + " | " + std::to_string(m.tp + m.fn) + " |\n";
    }
    return out;
}

}  // namespace nerbias
