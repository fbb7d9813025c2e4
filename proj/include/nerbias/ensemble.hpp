#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nerbias/bias.hpp"
#include "nerbias/common.hpp"
#include "nerbias/corpus.hpp"
#include "nerbias/crf.hpp"
#include "nerbias/tagger.hpp"
#include "nerbias/tokenizer.hpp"

namespace nerbias {

enum class EnsembleMode { none, bias_product, learned_mixin, learned_mixin_h };

inline std::string ensemble_mode_name(EnsembleMode m) {
    switch (m) {
        case EnsembleMode::none: return "none";
        case EnsembleMode::bias_product: return "bias_product";
        case EnsembleMode::learned_mixin: return "learned_mixin";
        case EnsembleMode::learned_mixin_h: return "learned_mixin_h";
    }
    return "?";
}

inline EnsembleMode ensemble_mode_from_name(std::string_view s) {
    if (s == "none") return EnsembleMode::none;
    if (s == "bias_product") return EnsembleMode::bias_product;
    if (s == "learned_mixin") return EnsembleMode::learned_mixin;
    if (s == "learned_mixin_h") return EnsembleMode::learned_mixin_h;
    throw ConfigError("unknown ensemble mode '" + std::string(s) + "'");
}

struct EnsembleConfig {
    EnsembleMode mode = EnsembleMode::none;
    double entropy_weight = 0.2;

    void validate() const {
        if (entropy_weight < 0) throw ConfigError("ensemble config: entropy_weight must be >= 0");
    }
};

// Bias lookup attached to a training run. Keys are subwords for the PMI and
// random tables, whole words for the word-frequency baseline.
struct BiasModel {
    BiasKind kind = BiasKind::uniform;
    const PmiTable* pmi = nullptr;
    const BiasTable* table = nullptr;
    TemperatureConfig temp;

    const std::vector<std::string>& classes() const {
        return kind == BiasKind::pmi ? pmi->classes : table->classes;
    }

    std::vector<double> lookup(const TokenizedSentence& ts, const Sentence& sent,
                               size_t pos) const {
        int len = temp.length_unit == LengthUnit::words ? ts.entity_len[pos]
                                                        : ts.entity_len_sub[pos];
        if (kind == BiasKind::pmi) return lookup_bias(*pmi, ts.subwords[pos], len, temp);
        if (kind == BiasKind::word_freq)
            return lookup_bias(*table, sent.words[ts.word_index[pos]], len, temp);
        return lookup_bias(*table, ts.subwords[pos], len, temp);
    }
};

// p_hat = softmax(log p + log b). Zero entries are clamped at 1e-12; the
// counter reports how often that happened.
inline std::vector<double> bias_product_logprobs(const std::vector<double>& p,
                                                 const std::vector<double>& b,
                                                 size_t* clamp_count = nullptr) {
    std::vector<double> logs(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        double pi = p[i], bi = b[i];
        if (pi < 1e-12) {
            pi = 1e-12;
            if (clamp_count) ++*clamp_count;
        }
        if (bi < 1e-12) {
            bi = 1e-12;
            if (clamp_count) ++*clamp_count;
        }
        logs[i] = std::log(pi) + std::log(bi);
    }
    return softmax_with_temperature(logs, 1.0);
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Loss and gradients of one sentence, summed (not averaged) over positions.
// The caller divides by the batch position count.
struct SentenceLoss {
    double loss_sum = 0.0;  // NLL plus entropy penalty
    int positions = 0;
    int correct = 0;  // model-only argmax vs gold, for the epoch log
    Eigen::MatrixXd d_logits;
    Eigen::MatrixXd d_hidden;  // extra term through the gate; empty unless mixin
    Eigen::VectorXd d_head;    // empty unless mixin
    Eigen::MatrixXd d_trans;   // empty unless crf
    Eigen::VectorXd d_start, d_stop;
};

// log_bias: N x C matrix of log b_i rows (already clamped), or empty for
// mode none. head_w empty means the gate is fixed at g = 1 (bias product).
inline SentenceLoss sentence_loss(const TaggerModel& model, const ForwardResult& fwd,
                                  const Eigen::MatrixXd& log_bias, const std::vector<int>& gold,
                                  EnsembleMode mode, const Eigen::VectorXd& head_w,
                                  double entropy_weight) {
    const auto n = fwd.logits.rows();
    const auto c = fwd.logits.cols();
    const bool use_bias = mode != EnsembleMode::none;
    const bool mixin = mode == EnsembleMode::learned_mixin || mode == EnsembleMode::learned_mixin_h;

    SentenceLoss out;
    out.positions = static_cast<int>(n);

    Eigen::VectorXd gate = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd gate_sig = Eigen::VectorXd::Zero(n);
    if (mixin) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double a = head_w.dot(fwd.hidden.row(i).transpose());
            gate(i) = softplus(a);
            gate_sig(i) = sigmoid(a);
        }
    }

    Eigen::MatrixXd scores = fwd.logits;
    if (use_bias) scores += gate.asDiagonal() * log_bias;

    Eigen::VectorXd d_gate = Eigen::VectorXd::Zero(n);
    if (model.cfg.decoder == Decoder::crf) {
        CrfBackward cb = crf_nll_backward(scores, model.trans, model.start, model.stop, gold);
        out.loss_sum = cb.nll;
        out.d_logits = std::move(cb.d_emissions);
        out.d_trans = std::move(cb.d_trans);
        out.d_start = std::move(cb.d_start);
        out.d_stop = std::move(cb.d_stop);
    } else {
        Eigen::MatrixXd q;
        softmax_rows(scores, q);
        out.d_logits = q;
        for (Eigen::Index i = 0; i < n; ++i) {
            out.loss_sum -= std::log(std::max(q(i, gold[i]), 1e-300));
            out.d_logits(i, gold[i]) -= 1.0;
        }
    }
    if (use_bias)
        for (Eigen::Index i = 0; i < n; ++i) d_gate(i) = out.d_logits.row(i).dot(log_bias.row(i));

    // Entropy penalty R = w * H(softmax(g * log b)), mean over positions is
    // taken by the caller together with the NLL.
    if (mode == EnsembleMode::learned_mixin_h && entropy_weight > 0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::ArrayXd u = gate(i) * log_bias.row(i).transpose().array();
            double mx = u.maxCoeff();
            Eigen::ArrayXd z = (u - mx).exp();
            z /= z.sum();
            double entropy = 0.0;
            for (Eigen::Index k = 0; k < c; ++k)
                if (z(k) > 0) entropy -= z(k) * std::log(z(k));
            out.loss_sum += entropy_weight * entropy;
            // dH/du_k = -z_k (H + log z_k)
            double dg = 0.0;
            for (Eigen::Index k = 0; k < c; ++k) {
                if (z(k) <= 0) continue;
                double dh_du = -z(k) * (entropy + std::log(z(k)));
                dg += dh_du * log_bias(i, k);
            }
            d_gate(i) += entropy_weight * dg;
        }
    }

    if (mixin) {
        out.d_hidden = Eigen::MatrixXd::Zero(n, model.cfg.hidden_dim);
        out.d_head = Eigen::VectorXd::Zero(head_w.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            double dgs = d_gate(i) * gate_sig(i);  // softplus' = sigmoid
            out.d_head += dgs * fwd.hidden.row(i).transpose();
            out.d_hidden.row(i) = dgs * head_w.transpose();
        }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index arg = 0;
        fwd.probs.row(i).maxCoeff(&arg);
        if (arg == gold[i]) ++out.correct;
    }
    return out;
}

// Named loss entry points mirroring the three objectives; all forward to
// sentence_loss and return the mean over positions.
inline double bias_product_loss(const TaggerModel& model, const ForwardResult& fwd,
                                const Eigen::MatrixXd& log_bias, const std::vector<int>& gold) {
    auto sl = sentence_loss(model, fwd, log_bias, gold, EnsembleMode::bias_product, {}, 0.0);
    return sl.loss_sum / sl.positions;
}

inline double learned_mixin_loss(const TaggerModel& model, const ForwardResult& fwd,
                                 const Eigen::MatrixXd& log_bias, const std::vector<int>& gold,
                                 const Eigen::VectorXd& head_w) {
    auto sl = sentence_loss(model, fwd, log_bias, gold, EnsembleMode::learned_mixin, head_w, 0.0);
    return sl.loss_sum / sl.positions;
}

inline double learned_mixin_h_loss(const TaggerModel& model, const ForwardResult& fwd,
                                   const Eigen::MatrixXd& log_bias, const std::vector<int>& gold,
                                   const Eigen::VectorXd& head_w, double entropy_weight) {
    auto sl = sentence_loss(model, fwd, log_bias, gold, EnsembleMode::learned_mixin_h, head_w,
                            entropy_weight);
    return sl.loss_sum / sl.positions;
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double token_accuracy = 0.0;
    double wall_seconds = 0.0;
};

struct TrainResult {
    TaggerModel model;
    Eigen::VectorXd head_w;
    AdamState adam;
    std::string final_rng_state;
    int final_epoch = 0;
    std::vector<EpochLog> log;
    size_t bias_clamp_count = 0;

    TrainSnapshot snapshot() const {
        TrainSnapshot s;
        s.model = model;
        s.head_w = head_w;
        s.adam = adam;
        s.rng_state = final_rng_state;
        s.epoch = final_epoch;
        return s;
    }
};

// class_map[c] gives the bias-table column backing tagger class c; identity
// when the axes match, group index when the bias table is collapsed {B,I,O}.
inline Eigen::MatrixXd build_log_bias(const BiasModel& bias, const TokenizedSentence& ts,
                                      const Sentence& sent, const std::vector<int>& class_map,
                                      size_t* clamp_count) {
    const size_t c = class_map.size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ts.subwords.size()),
                        static_cast<Eigen::Index>(c));
    for (size_t i = 0; i < ts.subwords.size(); ++i) {
        std::vector<double> b = bias.lookup(ts, sent, i);
        for (size_t k = 0; k < c; ++k) {
            double v = b[static_cast<size_t>(class_map[k])];
            if (v < 1e-12) {
                v = 1e-12;
                if (clamp_count) ++*clamp_count;
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::log(v);
        }
    }
    return out;
}

inline std::vector<int> bias_class_map(const std::vector<std::string>& bias_classes,
                                       const ClassSet& tagger_classes) {
    std::vector<int> map(tagger_classes.size());
    if (bias_classes == tagger_classes.names()) {
        for (size_t i = 0; i < map.size(); ++i) map[i] = static_cast<int>(i);
        return map;
    }
    if (bias_classes == std::vector<std::string>{"B", "I", "O"}) {
        for (size_t i = 0; i < map.size(); ++i) {
            char group = tagger_classes.names()[i][0];
            map[i] = group == 'B' ? 0 : group == 'I' ? 1 : 2;
        }
        return map;
    }
    throw ConfigError("train: bias table class order does not match tagger classes");
}

// Trains a tagger under the configured objective. The bias model is consulted
// only here: inference never sees it. Deterministic for a fixed seed.
inline TrainResult train(const Dataset& data, const std::vector<TokenizedSentence>& corpus,
                         const ClassSet& classes, const TaggerConfig& tcfg,
                         const EnsembleConfig& ecfg, const BiasModel* bias, int vocab_size,
                         const TrainSnapshot* resume = nullptr) {
    tcfg.validate();
    ecfg.validate();
    if (corpus.empty()) throw ConfigError("train: empty corpus");
    if (corpus.size() != data.size()) throw ConfigError("train: corpus/dataset size mismatch");
    const bool use_bias = ecfg.mode != EnsembleMode::none;
    std::vector<int> class_map;
    if (use_bias) {
        if (!bias) throw ConfigError("train: ensemble mode needs a bias model");
        class_map = bias_class_map(bias->classes(), classes);
    }
    const bool mixin = ecfg.mode == EnsembleMode::learned_mixin ||
                       ecfg.mode == EnsembleMode::learned_mixin_h;

    TrainResult res;
    std::vector<std::vector<int>> gold(corpus.size());
    std::vector<Eigen::MatrixXd> log_bias(corpus.size());
    for (size_t s = 0; s < corpus.size(); ++s) {
        gold[s].reserve(corpus[s].sub_tags.size());
        for (const std::string& t : corpus[s].sub_tags) gold[s].push_back(classes.class_of_tag(t));
        if (use_bias)
            log_bias[s] =
                build_log_bias(*bias, corpus[s], data[s], class_map, &res.bias_clamp_count);
    }

    TaggerModel model = resume ? resume->model : init_model(tcfg, vocab_size);
    Eigen::VectorXd head_w;
    if (mixin)
        head_w = resume && resume->head_w.size() ? resume->head_w
                                                 : Eigen::VectorXd::Zero(tcfg.hidden_dim);
    AdamState adam = resume ? resume->adam : AdamState(model, mixin ? tcfg.hidden_dim : 0);
    Rng order_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ull);
    if (resume && !resume->rng_state.empty()) order_rng.load_state(resume->rng_state);
    int first_epoch = resume ? resume->epoch : 0;

    const Eigen::MatrixXd empty_bias;
    for (int epoch = first_epoch; epoch < tcfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<size_t> order(corpus.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);

        double loss_sum = 0.0;
        int64_t position_count = 0, correct = 0;
        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(tcfg.batch_size)) {
            size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(tcfg.batch_size));
            Gradients grads(model);
            if (mixin) grads.head_w = Eigen::VectorXd::Zero(head_w.size());
            int batch_positions = 0;
            double batch_loss = 0.0;
            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                size_t s = order[bi];
                ForwardResult fwd = forward(model, corpus[s].ids);
                SentenceLoss sl =
                    sentence_loss(model, fwd, use_bias ? log_bias[s] : empty_bias, gold[s],
                                  ecfg.mode, head_w, ecfg.entropy_weight);
                accumulate_backward(model, corpus[s].ids, fwd, sl.d_logits,
                                    sl.d_hidden.size() ? &sl.d_hidden : nullptr, grads);
                if (sl.d_head.size()) grads.head_w += sl.d_head;
                if (sl.d_trans.size()) {
                    grads.trans += sl.d_trans;
                    grads.start += sl.d_start;
                    grads.stop += sl.d_stop;
                }
                batch_positions += sl.positions;
                batch_loss += sl.loss_sum;
                correct += sl.correct;
            }
            grads.scale(1.0 / batch_positions);
            if (!std::isfinite(batch_loss) || !grads.w1.allFinite() || !grads.embedding.allFinite())
                throw TrainError("non-finite gradient in epoch " + std::to_string(epoch) +
                                 ", batch starting at " + std::to_string(batch_start));
            if (tcfg.optimizer == Optimizer::sgd)
                sgd_step(model, mixin ? &head_w : nullptr, grads, tcfg.learning_rate);
            else
                adam.step(model, mixin ? &head_w : nullptr, grads, tcfg.learning_rate);
            loss_sum += batch_loss;
            position_count += batch_positions;
        }
        auto t1 = std::chrono::steady_clock::now();
        EpochLog el;
        el.epoch = epoch + 1;
        el.mean_loss = loss_sum / static_cast<double>(position_count);
        el.token_accuracy = static_cast<double>(correct) / static_cast<double>(position_count);
        el.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
        res.log.push_back(el);
    }

    res.model = std::move(model);
    res.head_w = std::move(head_w);
    res.adam = std::move(adam);
    res.final_rng_state = order_rng.save_state();
    res.final_epoch = tcfg.epochs;
    return res;
}

// ---------------------------------------------------------------------------
// Inference (no bias path, per the training-only contract)

inline std::vector<int> predict_classes(const TaggerModel& model, const std::vector<int>& ids) {
    ForwardResult fwd = forward(model, ids);
    std::vector<int> out(ids.size());
    if (model.cfg.decoder == Decoder::crf)
        return viterbi_decode(fwd.logits, model.trans, model.start, model.stop);
    for (Eigen::Index i = 0; i < fwd.logits.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < fwd.logits.cols(); ++c)
            if (fwd.logits(i, c) > fwd.logits(i, best)) best = static_cast<int>(c);
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

// Subword predictions projected to word level: a word takes the tag of its
// first subword.
inline std::vector<std::string> predict_word_tags(const TaggerModel& model,
                                                  const ClassSet& classes,
                                                  const TokenizedSentence& ts, size_t word_count) {
    std::vector<int> sub = predict_classes(model, ts.ids);
    std::vector<std::string> tags(word_count, "O");
    std::vector<bool> seen(word_count, false);
    for (size_t i = 0; i < sub.size(); ++i) {
        size_t w = static_cast<size_t>(ts.word_index[i]);
        if (!seen[w]) {
            seen[w] = true;
            tags[w] = classes.names()[static_cast<size_t>(sub[i])];
        }
    }
    return repair_bio(std::move(tags));
}

}  // namespace nerbias
