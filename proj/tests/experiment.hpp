// Desk-scale experiment drivers shared by the test suite and the acceptance
// runner: train-with/without-debiasing comparisons on the synthetic corpora.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "nerbias/bias.hpp"
#include "nerbias/commands.hpp"
#include "nerbias/ensemble.hpp"
#include "nerbias/eval.hpp"
#include "nerbias/partition.hpp"
#include "nerbias/synth.hpp"
#include "nerbias/tagger.hpp"
#include "nerbias/tokenizer.hpp"

namespace experiment {

using namespace nerbias;

struct Bundle {
    SynthOutput data;
    Vocab vocab;
    ClassSet classes;
    std::vector<TokenizedSentence> train_tok, test_tok;
    std::vector<PartitionedMention> mentions;
    std::vector<std::vector<EntitySpan>> gold;
    CountTable counts;
    PmiTable pmi;

    explicit Bundle(const SynthConfig& scfg, double smoothing_k)
        : data(generate_synthetic(scfg)),
          vocab(data.vocab, "[UNK]", false),
          classes(ClassSet::from_dataset(data.train)) {
        train_tok = tokenize_dataset(vocab, data.train);
        test_tok = tokenize_dataset(vocab, data.test);
        PartitionDicts dicts = build_dicts(data.train);
        mentions = partition_mentions(data.test, dicts);
        for (const Sentence& s : data.test) gold.push_back(extract_spans(s));
        counts = count_cooccurrence(train_tok, classes);
        pmi = compute_pmi(counts, smoothing_k);
    }
};

struct RunScores {
    double mem = 0.0;
    double unseen = 0.0;
    EvalReport report;
};

inline RunScores train_and_score(const Bundle& b, TaggerConfig tcfg, EnsembleMode mode,
                                 double lambda, LengthUnit unit = LengthUnit::words) {
    tcfg.num_classes = static_cast<int>(b.classes.size());
    BiasModel bias;
    bias.kind = BiasKind::pmi;
    bias.pmi = &b.pmi;
    bias.temp = TemperatureConfig{lambda, unit};
    EnsembleConfig ecfg{mode, 0.2};
    TrainResult r = train(b.data.train, b.train_tok, b.classes, tcfg, ecfg,
                          mode == EnsembleMode::none ? nullptr : &bias,
                          static_cast<int>(b.vocab.size()));

    std::vector<std::vector<EntitySpan>> pred;
    for (size_t s = 0; s < b.data.test.size(); ++s) {
        auto tags = predict_word_tags(r.model, b.classes, b.test_tok[s],
                                      b.data.test[s].words.size());
        pred.push_back(extract_spans(tags, &b.data.test[s].words));
    }
    RunScores out;
    out.report = build_report(b.gold, pred, b.mentions);
    auto rec = partition_recall(b.mentions, pred);
    if (rec.count(MentionSet::Mem)) out.mem = rec.at(MentionSet::Mem).recall();
    if (rec.count(MentionSet::Unseen)) out.unseen = rec.at(MentionSet::Unseen).recall();
    return out;
}

struct OovOutcome {
    double mem_none = 0, mem_bp = 0, unseen_none = 0, unseen_bp = 0;  // means
    std::vector<RunScores> none_runs, bp_runs;
};

// criterion: unseen recall of bias_product exceeds the plain baseline while
// Mem stays close
inline OovOutcome run_oov_experiment(const Bundle& b, TaggerConfig base,
                                     const std::vector<uint64_t>& seeds) {
    OovOutcome out;
    for (uint64_t seed : seeds) {
        TaggerConfig tcfg = base;
        tcfg.seed = seed;
        RunScores none = train_and_score(b, tcfg, EnsembleMode::none, 0.0);
        RunScores bp = train_and_score(b, tcfg, EnsembleMode::bias_product, 0.0);
        out.mem_none += none.mem;
        out.mem_bp += bp.mem;
        out.unseen_none += none.unseen;
        out.unseen_bp += bp.unseen;
        out.none_runs.push_back(std::move(none));
        out.bp_runs.push_back(std::move(bp));
    }
    const double n = static_cast<double>(seeds.size());
    out.mem_none /= n;
    out.mem_bp /= n;
    out.unseen_none /= n;
    out.unseen_bp /= n;
    return out;
}

struct TempOutcome {
    double long_f1_flat = 0, long_f1_scaled = 0;    // >=8 bucket means
    double short_diff_max = 0;                      // max |delta| over buckets 1-2
    std::vector<RunScores> flat_runs, scaled_runs;
};

// criterion: lambda > 0 helps (or at least never hurts) the >=8 bucket while
// buckets 1-2 barely move
inline TempOutcome run_temperature_experiment(const Bundle& b, TaggerConfig base,
                                              const std::vector<uint64_t>& seeds,
                                              double lambda) {
    TempOutcome out;
    double s1_flat = 0, s1_scaled = 0, s2_flat = 0, s2_scaled = 0;
    for (uint64_t seed : seeds) {
        TaggerConfig tcfg = base;
        tcfg.seed = seed;
        RunScores flat = train_and_score(b, tcfg, EnsembleMode::bias_product, 0.0);
        RunScores scaled = train_and_score(b, tcfg, EnsembleMode::bias_product, lambda);
        out.long_f1_flat += flat.report.buckets[kLengthBuckets - 1].f1;
        out.long_f1_scaled += scaled.report.buckets[kLengthBuckets - 1].f1;
        s1_flat += flat.report.buckets[0].f1;
        s1_scaled += scaled.report.buckets[0].f1;
        s2_flat += flat.report.buckets[1].f1;
        s2_scaled += scaled.report.buckets[1].f1;
        out.flat_runs.push_back(std::move(flat));
        out.scaled_runs.push_back(std::move(scaled));
    }
    const double n = static_cast<double>(seeds.size());
    out.long_f1_flat /= n;
    out.long_f1_scaled /= n;
    out.short_diff_max =
        std::max(std::abs(s1_flat - s1_scaled) / n, std::abs(s2_flat - s2_scaled) / n);
    return out;
}

}  // namespace experiment
