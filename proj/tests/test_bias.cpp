#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "helpers.hpp"
#include "nerbias/bias.hpp"
#include "oracles.hpp"

using namespace nerbias;

static std::vector<TokenizedSentence> tiny_tokenized() {
    TokenizedSentence ts;
    ts.subwords = {"Late", "##nt"};
    ts.sub_tags = {"O", "O"};
    ts.word_index = {0, 0};
    ts.entity_len = {1, 1};
    ts.entity_len_sub = {1, 1};
    return {ts};
}

TEST_CASE("count_cooccurrence counts subword/tag pairs") {
    ClassSet classes({"B-X", "I-X", "O"}, false);
    auto corpus = tiny_tokenized();
    CountTable t = count_cooccurrence(corpus, classes);
    REQUIRE(t.joint.at("Late") == std::vector<int64_t>{0, 0, 1});
    REQUIRE(t.joint.at("##nt") == std::vector<int64_t>{0, 0, 1});
    REQUIRE(t.total() == 2);

    corpus.push_back(corpus[0]);
    CountTable t2 = count_cooccurrence(corpus, classes);
    REQUIRE(t2.joint.at("Late") == std::vector<int64_t>{0, 0, 2});
    REQUIRE(t2.total() == 4);
}

TEST_CASE("count_cooccurrence rejects an empty corpus") {
    ClassSet classes({"O"}, false);
    REQUIRE_THROWS_AS(count_cooccurrence({}, classes), ConfigError);
}

TEST_CASE("a piece seen only with O has zeros elsewhere") {
    ClassSet classes({"B-X", "I-X", "O"}, false);
    CountTable t = count_cooccurrence(tiny_tokenized(), classes);
    REQUIRE(t.joint.at("Late")[0] == 0);
    REQUIRE(t.joint.at("Late")[1] == 0);
}

TEST_CASE("compute_pmi: uniform counts give zero PMI") {
    CountTable t;
    t.classes = {"B-X", "O"};
    t.joint["a"] = {5, 5};
    t.joint["b"] = {5, 5};
    PmiTable pmi = compute_pmi(t, 1.0);
    for (const auto& [_, row] : pmi.values)
        for (double v : row) REQUIRE(std::abs(v) < 1e-14);
}

TEST_CASE("compute_pmi matches the 2x2 brute-force oracle") {
    CountTable t;
    t.classes = {"B-X", "O"};
    t.joint["s1"] = {3, 0};
    t.joint["s2"] = {0, 3};
    PmiTable pmi = compute_pmi(t, 1.0);
    auto expect = oracle::pmi_brute_force({{3, 0}, {0, 3}}, 1.0);
    REQUIRE(pmi.values.at("s1")[0] == Catch::Approx(expect[0][0]).margin(1e-14));
    REQUIRE(pmi.values.at("s1")[1] == Catch::Approx(expect[0][1]).margin(1e-14));
    REQUIRE(pmi.values.at("s2")[0] == Catch::Approx(expect[1][0]).margin(1e-14));
    REQUIRE(pmi.values.at("s2")[1] == Catch::Approx(expect[1][1]).margin(1e-14));
}

TEST_CASE("compute_pmi equals the oracle on random tables") {
    Rng rng(101);
    for (int it = 0; it < 60; ++it) {
        size_t rows = 1 + rng.uniform_int(50);
        size_t cols = 2 + rng.uniform_int(8);
        CountTable t;
        for (size_t c = 0; c < cols; ++c) t.classes.push_back("c" + std::to_string(c));
        std::vector<std::vector<int64_t>> raw(rows, std::vector<int64_t>(cols));
        for (size_t s = 0; s < rows; ++s) {
            for (size_t c = 0; c < cols; ++c) raw[s][c] = static_cast<int64_t>(rng.uniform_int(200));
            t.joint["s" + std::to_string(s)] = raw[s];
        }
        double k = 0.5 + rng.uniform() * 200.0;
        PmiTable pmi = compute_pmi(t, k);
        auto expect = oracle::pmi_brute_force(raw, k);
        for (size_t s = 0; s < rows; ++s) {
            const auto& row = pmi.values.at("s" + std::to_string(s));
            for (size_t c = 0; c < cols; ++c)
                REQUIRE(row[c] == Catch::Approx(expect[s][c]).margin(1e-12));
        }
    }
}

TEST_CASE("huge K washes out all correlation") {
    CountTable t;
    t.classes = {"B-X", "O"};
    t.joint["s1"] = {40, 1};
    t.joint["s2"] = {2, 90};
    PmiTable pmi = compute_pmi(t, 1e9);
    for (const auto& [_, row] : pmi.values)
        for (double v : row) REQUIRE(std::abs(v) < 1e-6);
}

TEST_CASE("smoothed marginal consistency") {
    Rng rng(202);
    CountTable t;
    t.classes = {"B-X", "I-X", "O"};
    for (int s = 0; s < 20; ++s)
        t.joint["s" + std::to_string(s)] = {static_cast<int64_t>(rng.uniform_int(50)),
                                            static_cast<int64_t>(rng.uniform_int(50)),
                                            static_cast<int64_t>(rng.uniform_int(50))};
    const double k = 100.0;
    double grand = 0.0;
    for (const auto& [_, row] : t.joint)
        for (int64_t v : row) grand += static_cast<double>(v) + k;
    PmiTable pmi = compute_pmi(t, k);
    // sum_c exp(PMI(s,c)) * P(s) * P(c) must reproduce P(s) exactly
    for (const auto& [key, row] : t.joint) {
        double p_s = 0.0;
        for (int64_t v : row) p_s += (static_cast<double>(v) + k) / grand;
        double sum = 0.0;
        for (size_t c = 0; c < row.size(); ++c) {
            double p_c = 0.0;
            for (const auto& [k2, r2] : t.joint) p_c += (static_cast<double>(r2[c]) + k) / grand;
            sum += std::exp(pmi.values.at(key)[c]) * p_s * p_c;
        }
        REQUIRE(sum == Catch::Approx(p_s).margin(1e-12));
    }
}

TEST_CASE("softmax_with_temperature basics") {
    REQUIRE(softmax_with_temperature({1.0, 1.0, 1.0}, 1.0) ==
            std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
    auto v = softmax_with_temperature({std::log(3.0), 0.0}, 1.0);
    REQUIRE(v[0] == Catch::Approx(0.75).margin(1e-12));
    REQUIRE(v[1] == Catch::Approx(0.25).margin(1e-12));
    auto flat = softmax_with_temperature({2.0, -1.0, 0.5}, 1e6);
    for (double x : flat) REQUIRE(std::abs(x - 1.0 / 3) < 1e-3);
}

TEST_CASE("normalization properties over random rows") {
    Rng rng(303);
    const std::vector<double> temps = {1.0, 1.05, 1.2, 2.0, 10.0, 1e6};
    for (int it = 0; it < 300; ++it) {
        size_t c = 2 + rng.uniform_int(8);
        std::vector<double> row(c);
        for (double& v : row) v = rng.uniform(-4.0, 4.0);
        size_t argmax_row = 0;
        for (size_t i = 1; i < c; ++i)
            if (row[i] > row[argmax_row]) argmax_row = i;
        double prev_entropy = -1.0;
        for (double t : temps) {
            auto p = softmax_with_temperature(row, t);
            double sum = 0.0;
            for (double v : p) {
                REQUIRE(v > 0.0);
                REQUIRE(v < 1.0);
                sum += v;
            }
            REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
            size_t argmax_p = 0;
            for (size_t i = 1; i < c; ++i)
                if (p[i] > p[argmax_p]) argmax_p = i;
            REQUIRE(argmax_p == argmax_row);
            double h = oracle::entropy(p);
            REQUIRE(h >= prev_entropy - 1e-12);
            prev_entropy = h;
        }
    }
}

TEST_CASE("temperature_for") {
    TemperatureConfig cfg{0.05, LengthUnit::words};
    REQUIRE(temperature_for(1, cfg) == 1.0);
    REQUIRE(temperature_for(4, cfg) == Catch::Approx(1.2).margin(1e-12));
    TemperatureConfig zero{0.0, LengthUnit::words};
    REQUIRE(temperature_for(7, zero) == 1.0);
    REQUIRE_THROWS_AS(temperature_for(0, cfg), ConfigError);
}

TEST_CASE("lookup_bias on PMI tables") {
    PmiTable pmi;
    pmi.classes = {"B-X", "I-X", "O"};
    pmi.values["late"] = {0.9, -0.3, 0.2};
    TemperatureConfig cfg{0.05, LengthUnit::words};

    auto direct = lookup_bias(pmi, "late", 1, cfg);
    REQUIRE(direct == softmax_with_temperature(pmi.values["late"], 1.0));

    auto missing = lookup_bias(pmi, "absent", 1, cfg);
    for (double v : missing) REQUIRE(v == Catch::Approx(1.0 / 3).margin(1e-15));

    // longer entity -> strictly higher entropy for a non-constant row
    auto long_row = lookup_bias(pmi, "late", 8, cfg);
    REQUIRE(oracle::entropy(long_row) > oracle::entropy(direct));
}

TEST_CASE("word_frequency_bias") {
    ClassSet classes({"B-X", "I-X", "O"}, false);
    Dataset d;
    // "w": B once, I once, O twice
    d.push_back({{"w"}, {"B-X"}});
    d.push_back({{"w", "w", "w"}, {"I-X", "O", "O"}});
    BiasTable t = word_frequency_bias(d, classes, 0.0);
    REQUIRE(t.dist.at("w") == std::vector<double>{0.25, 0.25, 0.5});

    TemperatureConfig cfg;
    auto unseen = lookup_bias(t, "unknown", 1, cfg);
    for (double v : unseen) REQUIRE(v == Catch::Approx(1.0 / 3).margin(1e-15));

    // alpha -> 0 approaches the one-hot relative frequency
    Dataset hot = {{{"x", "x", "x", "x"}, {"B-X", "B-X", "B-X", "B-X"}}};
    BiasTable h = word_frequency_bias(hot, classes, 1e-9);
    REQUIRE(h.dist.at("x")[0] == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("random_bias draws valid reproducible distributions") {
    ClassSet classes({"B-X", "O"}, false);
    BiasTable a = random_bias(classes, {"p", "q"}, 99);
    BiasTable b = random_bias(classes, {"p", "q"}, 99);
    REQUIRE(a.dist == b.dist);
    for (const auto& [_, row] : a.dist) {
        double sum = 0.0;
        for (double v : row) {
            REQUIRE(v > 0.0);
            REQUIRE(v < 1.0);
            sum += v;
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
    BiasTable c = random_bias(classes, {"p", "q"}, 100);
    REQUIRE(a.dist != c.dist);
}

TEST_CASE("pmi table TSV round trip") {
    ClassSet classes({"B-X", "I-X", "O"}, false);
    auto corpus = tiny_tokenized();
    CountTable counts = count_cooccurrence(corpus, classes);
    PmiTable pmi = compute_pmi(counts, 100.0);
    std::string tsv = export_pmi_table(counts, pmi, 0.05, "abc123");

    PmiImport imported = import_pmi_table(tsv);
    REQUIRE(imported.counts.classes == counts.classes);
    REQUIRE(imported.counts.joint == counts.joint);
    REQUIRE(imported.pmi.values == pmi.values);
    REQUIRE(imported.pmi.smoothing_k == 100.0);
    REQUIRE(imported.lambda == 0.05);
    REQUIRE(imported.corpus_checksum == "abc123");

    // byte-level fixed point
    REQUIRE(export_pmi_table(imported.counts, imported.pmi, imported.lambda,
                             imported.corpus_checksum) == tsv);
}

TEST_CASE("pmi table import rejects tampering") {
    ClassSet classes({"B-X", "O"}, false);
    CountTable counts;
    counts.classes = classes.names();
    counts.joint["s"] = {3, 5};
    counts.joint["t"] = {20, 1};
    PmiTable pmi = compute_pmi(counts, 10.0);
    std::string tsv = export_pmi_table(counts, pmi);

    SECTION("header mismatch") {
        std::string bad = tsv;
        size_t pos = bad.find("subword\t");
        bad.replace(pos, 8, "subwrd\t\t");
        REQUIRE_THROWS_AS(import_pmi_table(bad), FormatError);
    }
    SECTION("non-numeric cell") {
        std::string bad = tsv;
        size_t pos = bad.rfind('\t');
        bad.replace(pos + 1, 1, "x");
        REQUIRE_THROWS_AS(import_pmi_table(bad), FormatError);
    }
    SECTION("values inconsistent with counts") {
        std::string bad = tsv;
        size_t pos = bad.rfind("\t3\t");
        bad.replace(pos, 3, "\t7\t");
        REQUIRE_THROWS_AS(import_pmi_table(bad), FormatError);
    }
}

TEST_CASE("bias table TSV round trip") {
    ClassSet classes({"B-X", "I-X", "O"}, false);
    Dataset d = {{{"w", "v"}, {"B-X", "O"}}};
    BiasTable t = word_frequency_bias(d, classes, 1.0);
    std::string tsv = export_bias_table(t, {{"alpha", "1"}});
    BiasTable back = import_bias_table(tsv);
    REQUIRE(back.kind == BiasKind::word_freq);
    REQUIRE(back.classes == t.classes);
    REQUIRE(export_bias_table(back, {{"alpha", "1"}}) == tsv);

    std::string one_row = "# kind = uniform\n# classes = B-X,O\nsubword\tB-X\tO\nz\t0.5\t0.5\n";
    BiasTable single = import_bias_table(one_row);
    REQUIRE(single.dist.size() == 1);
}
