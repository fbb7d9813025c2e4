#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "nerbias/eval.hpp"
#include "oracles.hpp"

using namespace nerbias;

namespace {

using Spans = std::vector<std::vector<EntitySpan>>;

Spans gold_spans_of(const Dataset& d) {
    Spans out;
    for (const auto& s : d) out.push_back(extract_spans(s));
    return out;
}

// random predictions: perturbed copies of gold plus noise spans
Spans noisy_predictions(Rng& rng, const Dataset& d) {
    Spans out;
    for (const auto& s : d) {
        std::vector<EntitySpan> spans;
        for (const auto& g : extract_spans(s)) {
            double r = rng.uniform();
            if (r < 0.55) {
                spans.push_back(g);  // keep
            } else if (r < 0.75 && g.end + 1 < static_cast<int>(s.words.size())) {
                EntitySpan moved = g;  // boundary error
                moved.end += 1;
                moved.surface += " " + s.words[moved.end];
                spans.push_back(moved);
            }  // else drop
        }
        if (!s.words.empty() && rng.bernoulli(0.3)) {
            int a = static_cast<int>(rng.uniform_int(s.words.size()));
            int b = std::min<int>(static_cast<int>(s.words.size()) - 1,
                                  a + static_cast<int>(rng.uniform_int(3)));
            EntitySpan fp;
            fp.start = a;
            fp.end = b;
            fp.etype = rng.bernoulli(0.5) ? "PER" : "LOC";
            for (int k = a; k <= b; ++k) {
                if (k > a) fp.surface += ' ';
                fp.surface += s.words[k];
            }
            spans.push_back(fp);
        }
        std::sort(spans.begin(), spans.end(), [](const EntitySpan& x, const EntitySpan& y) {
            return std::tie(x.start, x.end, x.etype) < std::tie(y.start, y.end, y.etype);
        });
        out.push_back(std::move(spans));
    }
    return out;
}

}  // namespace

TEST_CASE("entity_prf identity and zero cases") {
    Rng rng(81);
    Dataset d = testutil::random_dataset(rng, 10);
    Spans gold = gold_spans_of(d);
    Prf perfect = entity_prf(gold, gold);
    REQUIRE(perfect.precision == 1.0);
    REQUIRE(perfect.recall == 1.0);
    REQUIRE(perfect.f1 == 1.0);

    Spans empty(gold.size());
    Prf none = entity_prf(gold, empty);
    REQUIRE(none.precision == 0.0);
    REQUIRE(none.recall == 0.0);
    REQUIRE(none.f1 == 0.0);
}

TEST_CASE("f1 formula identity") {
    // P = 0.5, R = 1.0 -> F1 = 2/3
    Prf m = prf_from_counts(2, 2, 0);
    REQUIRE(m.precision == 0.5);
    REQUIRE(m.recall == 1.0);
    REQUIRE(m.f1 == Catch::Approx(2.0 / 3).margin(1e-15));

    Rng rng(82);
    for (int it = 0; it < 500; ++it) {
        size_t tp = rng.uniform_int(20), fp = rng.uniform_int(20), fn = rng.uniform_int(20);
        Prf x = prf_from_counts(tp, fp, fn);
        if (x.precision + x.recall > 0)
            REQUIRE(x.f1 == Catch::Approx(2 * x.precision * x.recall / (x.precision + x.recall))
                                .margin(1e-12));
    }
}

TEST_CASE("entity_prf matches the brute-force oracle on random corpora") {
    Rng rng(83);
    for (int it = 0; it < 200; ++it) {
        Dataset d = testutil::random_dataset(rng, 8);
        Spans gold = gold_spans_of(d);
        Spans pred = noisy_predictions(rng, d);
        Prf mine = entity_prf(gold, pred);
        auto brute = oracle::entity_counts_brute_force(gold, pred);
        REQUIRE(mine.tp == brute.tp);
        REQUIRE(mine.fp == brute.fp);
        REQUIRE(mine.fn == brute.fn);
    }
}

TEST_CASE("entity_prf collapses duplicate predictions") {
    Dataset d = {{{"a", "b"}, {"B-PER", "O"}}};
    Spans gold = gold_spans_of(d);
    EntitySpan sp{0, 0, "PER", "a"};
    Spans dup = {{sp, sp, sp}};
    Prf m = entity_prf(gold, dup);
    REQUIRE(m.tp == 1);
    REQUIRE(m.fp == 0);
    REQUIRE(m.f1 == 1.0);
}

TEST_CASE("entity_prf is invariant under sentence permutation") {
    Rng rng(84);
    Dataset d = testutil::random_dataset(rng, 12);
    Spans gold = gold_spans_of(d);
    Spans pred = noisy_predictions(rng, d);
    Prf a = entity_prf(gold, pred);
    std::vector<size_t> perm(d.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);
    Spans gold2, pred2;
    for (size_t i : perm) {
        gold2.push_back(gold[i]);
        pred2.push_back(pred[i]);
    }
    Prf b = entity_prf(gold2, pred2);
    REQUIRE(a.tp == b.tp);
    REQUIRE(a.fp == b.fp);
    REQUIRE(a.fn == b.fn);
}

TEST_CASE("partition_recall") {
    Dataset train = {{{"london"}, {"B-LOC"}}};
    Dataset eval = {{{"london", "paris"}, {"B-LOC", "B-LOC"}}};
    PartitionDicts dicts = build_dicts(train);
    auto mentions = partition_mentions(eval, dicts);

    SECTION("all matched") {
        auto rec = partition_recall(mentions, gold_spans_of(eval));
        REQUIRE(rec.at(MentionSet::Mem).recall() == 1.0);
        REQUIRE(rec.at(MentionSet::Unseen).recall() == 1.0);
    }
    SECTION("no predictions") {
        auto rec = partition_recall(mentions, Spans(eval.size()));
        REQUIRE(rec.at(MentionSet::Mem).recall() == 0.0);
        REQUIRE(rec.at(MentionSet::Unseen).recall() == 0.0);
    }
    SECTION("mixed hit and miss") {
        Spans pred = {{EntitySpan{0, 0, "LOC", "london"}}};
        auto rec = partition_recall(mentions, pred);
        REQUIRE(rec.at(MentionSet::Mem).recall() == 1.0);
        REQUIRE(rec.at(MentionSet::Unseen).recall() == 0.0);
    }
    SECTION("empty sets are absent, not zero") {
        auto rec = partition_recall(mentions, gold_spans_of(eval));
        REQUIRE(rec.count(MentionSet::Syn) == 0);
        REQUIRE(rec.count(MentionSet::Con) == 0);
    }
}

TEST_CASE("total recall is the support-weighted mean of partition recalls") {
    Rng rng(85);
    for (int it = 0; it < 50; ++it) {
        Dataset train = testutil::random_dataset(rng, 10);
        Dataset eval = testutil::random_dataset(rng, 10);
        PartitionDicts dicts = build_dicts(train);
        auto mentions = partition_mentions(eval, dicts);
        Spans gold = gold_spans_of(eval);
        Spans pred = noisy_predictions(rng, eval);
        auto rec = partition_recall(mentions, pred);
        Prf total = entity_prf(gold, pred);
        size_t matched = 0, support = 0;
        for (const auto& [_, r] : rec) {
            matched += r.matched;
            support += r.total;
        }
        REQUIRE(support == total.tp + total.fn);
        REQUIRE(matched == total.tp);
    }
}

TEST_CASE("surface_form_prf") {
    SECTION("dedup semantics") {
        Dataset d = {{{"London"}, {"B-LOC"}}, {{"London"}, {"B-LOC"}}};
        Spans gold = gold_spans_of(d);
        Spans pred = {{EntitySpan{0, 0, "LOC", "London"}}, {}};
        Prf m = surface_form_prf(gold, pred);
        REQUIRE(m.recall == 1.0);  // one unique gold surface, found once
        REQUIRE(m.precision == 1.0);
    }
    SECTION("case folding") {
        Spans gold = {{EntitySpan{0, 0, "LOC", "London"}}};
        Spans pred = {{EntitySpan{3, 3, "LOC", "LONDON"}}};
        Prf m = surface_form_prf(gold, pred);
        REQUIRE(m.recall == 1.0);  // surfaces match after lowercasing
    }
    SECTION("disjoint surface sets") {
        Spans gold = {{EntitySpan{0, 0, "LOC", "a"}}};
        Spans pred = {{EntitySpan{0, 0, "LOC", "b"}}};
        Prf m = surface_form_prf(gold, pred);
        REQUIRE(m.precision == 0.0);
        REQUIRE(m.recall == 0.0);
        REQUIRE(m.f1 == 0.0);
    }
    SECTION("matches the unique-set oracle on random corpora") {
        Rng rng(86);
        for (int it = 0; it < 200; ++it) {
            Dataset d = testutil::random_dataset(rng, 8);
            Spans gold = gold_spans_of(d);
            Spans pred = noisy_predictions(rng, d);
            Prf mine = surface_form_prf(gold, pred);
            auto brute = oracle::surface_counts_brute_force(gold, pred);
            REQUIRE(mine.tp == brute.tp);
            REQUIRE(mine.fp == brute.fp);
            REQUIRE(mine.fn == brute.fn);
        }
    }
}

TEST_CASE("length_bucketed_prf") {
    SECTION("single-length corpora populate one bucket") {
        Dataset d = {{{"a", "b", "c"}, {"B-PER", "O", "B-PER"}}};
        Spans gold = gold_spans_of(d);
        auto buckets = length_bucketed_prf(gold, gold);
        REQUIRE(buckets[0].tp == 2);
        for (int b = 1; b < kLengthBuckets; ++b) {
            REQUIRE(buckets[b].tp == 0);
            REQUIRE(buckets[b].fn == 0);
        }
    }
    SECTION("an 8-word entity lands in the >=8 bucket") {
        Sentence s;
        for (int i = 0; i < 8; ++i) {
            s.words.push_back("w" + std::to_string(i));
            s.tags.push_back(i == 0 ? "B-GENE" : "I-GENE");
        }
        Spans gold = gold_spans_of({s});
        auto buckets = length_bucketed_prf(gold, gold);
        REQUIRE(buckets[kLengthBuckets - 1].tp == 1);
        REQUIRE(buckets[kLengthBuckets - 1].recall == 1.0);
    }
    SECTION("matches the filter-then-score oracle on random corpora") {
        Rng rng(87);
        for (int it = 0; it < 100; ++it) {
            Dataset d = testutil::random_dataset(rng, 8);
            Spans gold = gold_spans_of(d);
            Spans pred = noisy_predictions(rng, d);
            auto buckets = length_bucketed_prf(gold, pred);
            for (int b = 0; b < kLengthBuckets; ++b) {
                int lo = b + 1;
                int hi = b == kLengthBuckets - 1 ? 1 << 20 : b + 1;
                auto brute = oracle::bucket_counts_brute_force(gold, pred, lo, hi);
                REQUIRE(buckets[b].tp == brute.tp);
                REQUIRE(buckets[b].fp == brute.fp);
                REQUIRE(buckets[b].fn == brute.fn);
            }
        }
    }
}

TEST_CASE("report rendering includes every section") {
    Dataset train = {{{"london"}, {"B-LOC"}}};
    Dataset eval = {{{"london", "paris"}, {"B-LOC", "B-LOC"}}};
    PartitionDicts dicts = build_dicts(train);
    auto mentions = partition_mentions(eval, dicts);
    Spans gold = gold_spans_of(eval);
    EvalReport rep = build_report(gold, gold, mentions);
    std::string tsv = report_to_tsv(rep);
    REQUIRE(tsv.find("total\t") != std::string::npos);
    REQUIRE(tsv.find("Mem\t") != std::string::npos);
    REQUIRE(tsv.find("Unseen\t") != std::string::npos);
    REQUIRE(tsv.find("surface\t") != std::string::npos);
    REQUIRE(tsv.find("len_>=8") != std::string::npos);
    std::string md = report_to_markdown(rep);
    REQUIRE(md.find("| total |") != std::string::npos);
}
