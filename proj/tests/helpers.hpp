#pragma once

#include <string>
#include <vector>

#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"

namespace testutil {

inline std::string test_dir() { return NERBIAS_TEST_DIR; }

// Random word over a-z.
inline std::string random_word(nerbias::Rng& rng, int min_len = 1, int max_len = 8) {
    int len = min_len + static_cast<int>(rng.uniform_int(max_len - min_len + 1));
    std::string w;
    for (int i = 0; i < len; ++i) w += static_cast<char>('a' + rng.uniform_int(26));
    return w;
}

// Random valid-BIO sentence over the given entity types.
inline nerbias::Sentence random_sentence(nerbias::Rng& rng,
                                         const std::vector<std::string>& types,
                                         int max_words = 12) {
    nerbias::Sentence s;
    int n = 1 + static_cast<int>(rng.uniform_int(max_words));
    std::string open_type;
    for (int i = 0; i < n; ++i) {
        s.words.push_back(random_word(rng));
        double r = rng.uniform();
        if (!open_type.empty() && r < 0.4) {
            s.tags.push_back("I-" + open_type);
            continue;
        }
        if (r < 0.35) {
            open_type = types[rng.uniform_int(types.size())];
            s.tags.push_back("B-" + open_type);
        } else {
            open_type.clear();
            s.tags.push_back("O");
        }
    }
    return s;
}

inline nerbias::Dataset random_dataset(nerbias::Rng& rng, int sentences,
                                       const std::vector<std::string>& types = {"PER", "LOC"}) {
    nerbias::Dataset d;
    for (int i = 0; i < sentences; ++i) d.push_back(random_sentence(rng, types));
    return d;
}

}  // namespace testutil
