#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nerbias/common.hpp"

namespace nerbias {

enum class Decoder { softmax, crf };

inline std::string decoder_name(Decoder d) { return d == Decoder::crf ? "crf" : "softmax"; }
inline Decoder decoder_from_name(std::string_view s) {
    if (s == "crf") return Decoder::crf;
    if (s == "softmax") return Decoder::softmax;
    throw ConfigError("unknown decoder '" + std::string(s) + "'");
}

enum class Optimizer { adam, sgd };

inline std::string optimizer_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }
inline Optimizer optimizer_from_name(std::string_view s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "sgd") return Optimizer::sgd;
    throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct TaggerConfig {
    int embed_dim = 16;
    int hidden_dim = 32;
    int context_window = 5;  // odd; subword positions concatenated around i
    int num_classes = 0;
    Decoder decoder = Decoder::softmax;
    Optimizer optimizer = Optimizer::adam;
    uint64_t seed = 1;
    double learning_rate = 1e-3;
    int epochs = 10;
    int batch_size = 32;

    void validate() const {
        if (embed_dim < 1 || hidden_dim < 1 || num_classes < 1)
            throw ConfigError("tagger config: dimensions must be >= 1");
        if (context_window < 1 || context_window % 2 == 0)
            throw ConfigError("tagger config: context_window must be odd and positive");
        if (epochs < 0 || batch_size < 1) throw ConfigError("tagger config: bad epochs/batch_size");
    }
};

// Window-MLP tagger. The embedding matrix has vocab_rows + 1 rows; the
// extra final row is the boundary embedding used for window positions that
// fall outside the sentence.
struct TaggerModel {
    TaggerConfig cfg;
    int vocab_rows = 0;
    Eigen::MatrixXd embedding;  // (vocab_rows + 1) x embed_dim
    Eigen::MatrixXd w1;         // hidden x (context_window * embed_dim)
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // num_classes x hidden
    Eigen::VectorXd b2;
    Eigen::MatrixXd trans;  // crf only
    Eigen::VectorXd start;
    Eigen::VectorXd stop;

    int boundary_row() const { return vocab_rows; }

    struct TensorRef {
        const char* name;
        Eigen::MatrixXd* mat = nullptr;
        Eigen::VectorXd* vec = nullptr;
        double* data() const { return mat ? mat->data() : vec->data(); }
        Eigen::Index size() const { return mat ? mat->size() : vec->size(); }
        Eigen::Index rows() const { return mat ? mat->rows() : vec->size(); }
        Eigen::Index cols() const { return mat ? mat->cols() : 1; }
    };

    std::vector<TensorRef> tensors() {
        return {{"embedding", &embedding, nullptr}, {"w1", &w1, nullptr},
                {"b1", nullptr, &b1},               {"w2", &w2, nullptr},
                {"b2", nullptr, &b2},               {"trans", &trans, nullptr},
                {"start", nullptr, &start},         {"stop", nullptr, &stop}};
    }
};

inline TaggerModel init_model(const TaggerConfig& cfg, int vocab_size) {
    cfg.validate();
    if (vocab_size < 1) throw ConfigError("init_model: empty vocabulary");
    TaggerModel m;
    m.cfg = cfg;
    m.vocab_rows = vocab_size;
    const int input_dim = cfg.context_window * cfg.embed_dim;
    m.embedding.resize(vocab_size + 1, cfg.embed_dim);
    m.w1.resize(cfg.hidden_dim, input_dim);
    m.b1 = Eigen::VectorXd::Zero(cfg.hidden_dim);
    m.w2.resize(cfg.num_classes, cfg.hidden_dim);
    m.b2 = Eigen::VectorXd::Zero(cfg.num_classes);
    m.trans = Eigen::MatrixXd::Zero(cfg.num_classes, cfg.num_classes);
    m.start = Eigen::VectorXd::Zero(cfg.num_classes);
    m.stop = Eigen::VectorXd::Zero(cfg.num_classes);

    Rng rng(cfg.seed);
    auto fill = [&](Eigen::MatrixXd& t, double range) {
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-range, range);
    };
    fill(m.embedding, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
    fill(m.w1, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    fill(m.w2, 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
    return m;
}

struct ForwardResult {
    Eigen::MatrixXd logits;  // N x C
    Eigen::MatrixXd probs;   // row softmax of logits
    Eigen::MatrixXd hidden;  // N x hidden_dim
    Eigen::MatrixXd window;  // N x (context_window * embed_dim), cached inputs
};

inline void softmax_rows(const Eigen::MatrixXd& in, Eigen::MatrixXd& out) {
    out.resizeLike(in);
    for (Eigen::Index i = 0; i < in.rows(); ++i) {
        double mx = in.row(i).maxCoeff();
        Eigen::ArrayXd e = (in.row(i).array() - mx).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
}

inline ForwardResult forward(const TaggerModel& m, const std::vector<int>& ids) {
    const int n = static_cast<int>(ids.size());
    const int d = m.cfg.embed_dim;
    const int radius = (m.cfg.context_window - 1) / 2;
    ForwardResult fr;
    fr.window.resize(n, m.cfg.context_window * d);
    for (int i = 0; i < n; ++i) {
        for (int o = -radius; o <= radius; ++o) {
            int j = i + o;
            int row = (j < 0 || j >= n) ? m.boundary_row() : ids[j];
            fr.window.block(i, (o + radius) * d, 1, d) = m.embedding.row(row);
        }
    }
    fr.hidden = ((fr.window * m.w1.transpose()).rowwise() + m.b1.transpose())
                    .array()
                    .tanh()
                    .matrix();
    fr.logits = (fr.hidden * m.w2.transpose()).rowwise() + m.b2.transpose();
    softmax_rows(fr.logits, fr.probs);
    return fr;
}

struct Gradients {
    Eigen::MatrixXd embedding, w1, w2, trans;
    Eigen::VectorXd b1, b2, start, stop;
    Eigen::VectorXd head_w;  // learned-mixin gate vector, when in use

    explicit Gradients(const TaggerModel& m) {
        embedding = Eigen::MatrixXd::Zero(m.embedding.rows(), m.embedding.cols());
        w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
        b1 = Eigen::VectorXd::Zero(m.b1.size());
        w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
        b2 = Eigen::VectorXd::Zero(m.b2.size());
        trans = Eigen::MatrixXd::Zero(m.trans.rows(), m.trans.cols());
        start = Eigen::VectorXd::Zero(m.start.size());
        stop = Eigen::VectorXd::Zero(m.stop.size());
    }

    void scale(double a) {
        embedding *= a; w1 *= a; b1 *= a; w2 *= a; b2 *= a;
        trans *= a; start *= a; stop *= a;
        if (head_w.size()) head_w *= a;
    }
};

// Backbone backward pass: given dL/dlogits (and optionally an extra
// dL/dhidden from the gate head), accumulate parameter gradients.
inline void accumulate_backward(const TaggerModel& m, const std::vector<int>& ids,
                                const ForwardResult& fr, const Eigen::MatrixXd& d_logits,
                                const Eigen::MatrixXd* d_hidden_extra, Gradients& g) {
    const int n = static_cast<int>(ids.size());
    const int d = m.cfg.embed_dim;
    const int radius = (m.cfg.context_window - 1) / 2;

    g.w2.noalias() += d_logits.transpose() * fr.hidden;
    g.b2.noalias() += d_logits.colwise().sum().transpose();

    Eigen::MatrixXd d_hidden = d_logits * m.w2;  // N x hidden
    if (d_hidden_extra) d_hidden += *d_hidden_extra;
    Eigen::MatrixXd d_pre =
        (d_hidden.array() * (1.0 - fr.hidden.array().square())).matrix();  // tanh'

    g.w1.noalias() += d_pre.transpose() * fr.window;
    g.b1.noalias() += d_pre.colwise().sum().transpose();

    Eigen::MatrixXd d_window = d_pre * m.w1;  // N x (window * d)
    for (int i = 0; i < n; ++i) {
        for (int o = -radius; o <= radius; ++o) {
            int j = i + o;
            int row = (j < 0 || j >= n) ? m.boundary_row() : ids[j];
            g.embedding.row(row) += d_window.block(i, (o + radius) * d, 1, d);
        }
    }
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    explicit AdamState(TaggerModel& m, Eigen::Index head_dim = 0) {
        for (auto& t : m.tensors()) {
            names_.emplace_back(t.name);
            m_.emplace_back(Eigen::ArrayXd::Zero(t.size()));
            v_.emplace_back(Eigen::ArrayXd::Zero(t.size()));
        }
        if (head_dim > 0) {
            names_.emplace_back("head_w");
            m_.emplace_back(Eigen::ArrayXd::Zero(head_dim));
            v_.emplace_back(Eigen::ArrayXd::Zero(head_dim));
        }
    }

    int64_t step_count() const { return t_; }

    void step(TaggerModel& model, Eigen::VectorXd* head_w, const Gradients& g, double lr,
              const AdamConfig& cfg = {}) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
        size_t k = 0;
        auto update = [&](double* p, const double* grad, Eigen::Index size) {
            Eigen::Map<Eigen::ArrayXd> param(p, size);
            Eigen::Map<const Eigen::ArrayXd> gr(grad, size);
            m_[k] = cfg.beta1 * m_[k] + (1.0 - cfg.beta1) * gr;
            v_[k] = cfg.beta2 * v_[k] + (1.0 - cfg.beta2) * gr.square();
            param -= lr * (m_[k] / c1) / ((v_[k] / c2).sqrt() + cfg.eps);
            ++k;
        };
        const Gradients* gp = &g;
        update(model.embedding.data(), gp->embedding.data(), model.embedding.size());
        update(model.w1.data(), gp->w1.data(), model.w1.size());
        update(model.b1.data(), gp->b1.data(), model.b1.size());
        update(model.w2.data(), gp->w2.data(), model.w2.size());
        update(model.b2.data(), gp->b2.data(), model.b2.size());
        update(model.trans.data(), gp->trans.data(), model.trans.size());
        update(model.start.data(), gp->start.data(), model.start.size());
        update(model.stop.data(), gp->stop.data(), model.stop.size());
        if (head_w && head_w->size() && k < m_.size())
            update(head_w->data(), gp->head_w.data(), head_w->size());
    }

    const std::vector<std::string>& names() const { return names_; }
    std::vector<Eigen::ArrayXd>& moment1() { return m_; }
    std::vector<Eigen::ArrayXd>& moment2() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

private:
    std::vector<std::string> names_;
    std::vector<Eigen::ArrayXd> m_;
    std::vector<Eigen::ArrayXd> v_;
    int64_t t_ = 0;
};

inline void sgd_step(TaggerModel& model, Eigen::VectorXd* head_w, const Gradients& g, double lr) {
    model.embedding -= lr * g.embedding;
    model.w1 -= lr * g.w1;
    model.b1 -= lr * g.b1;
    model.w2 -= lr * g.w2;
    model.b2 -= lr * g.b2;
    model.trans -= lr * g.trans;
    model.start -= lr * g.start;
    model.stop -= lr * g.stop;
    if (head_w && head_w->size()) *head_w -= lr * g.head_w;
}

// ---------------------------------------------------------------------------
// Checkpoint: versioned UTF-8 key-value text. One line per tensor with its
// shape followed by row-major values at 17 significant digits, so the round
// trip is bit-exact.

struct TrainSnapshot {
    TaggerModel model;
    Eigen::VectorXd head_w;  // empty unless learned-mixin
    AdamState adam;
    std::string rng_state;
    int epoch = 0;
};

namespace detail {

inline void write_tensor_line(std::string& out, std::string_view prefix, std::string_view name,
                              const double* data, Eigen::Index rows, Eigen::Index cols) {
    out += prefix;
    out += ' ';
    out += name;
    out += ' ';
    out += std::to_string(rows);
    out += ' ';
    out += std::to_string(cols);
    for (Eigen::Index i = 0; i < rows * cols; ++i) {
        out += ' ';
        out += format_exact(data[i]);
    }
    out += '\n';
}

}  // namespace detail

inline std::string save_checkpoint(TrainSnapshot& snap) {
    TaggerModel& m = snap.model;
    std::string out = "nerbias-checkpoint v1\n";
    out += "config embed_dim=" + std::to_string(m.cfg.embed_dim) +
           " hidden_dim=" + std::to_string(m.cfg.hidden_dim) +
           " context_window=" + std::to_string(m.cfg.context_window) +
           " num_classes=" + std::to_string(m.cfg.num_classes) +
           " decoder=" + decoder_name(m.cfg.decoder) +
           " optimizer=" + optimizer_name(m.cfg.optimizer) + " seed=" + std::to_string(m.cfg.seed) +
           " learning_rate=" + format_exact(m.cfg.learning_rate) +
           " epochs=" + std::to_string(m.cfg.epochs) +
           " batch_size=" + std::to_string(m.cfg.batch_size) + "\n";
    out += "vocab_rows " + std::to_string(m.vocab_rows) + "\n";
    out += "epoch " + std::to_string(snap.epoch) + "\n";
    for (auto& t : m.tensors())
        detail::write_tensor_line(out, "tensor", t.name, t.data(), t.rows(), t.cols());
    if (snap.head_w.size())
        detail::write_tensor_line(out, "tensor", "head_w", snap.head_w.data(), snap.head_w.size(),
                                  1);
    out += "adam_t " + std::to_string(snap.adam.step_count()) + "\n";
    for (size_t i = 0; i < snap.adam.names().size(); ++i) {
        detail::write_tensor_line(out, "adam_m", snap.adam.names()[i], snap.adam.moment1()[i].data(),
                                  snap.adam.moment1()[i].size(), 1);
        detail::write_tensor_line(out, "adam_v", snap.adam.names()[i], snap.adam.moment2()[i].data(),
                                  snap.adam.moment2()[i].size(), 1);
    }
    if (!snap.rng_state.empty()) out += "rng " + snap.rng_state + "\n";
    out += "end\n";
    return out;
}

inline TrainSnapshot load_checkpoint(const std::string& text) {
    TrainSnapshot snap;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "nerbias-checkpoint v1")
        throw FormatError("checkpoint: bad magic line");

    auto read_kv = [&](std::string_view item, const std::string& ctx) {
        size_t eq = item.find('=');
        if (eq == std::string_view::npos) throw FormatError("checkpoint: bad config item in " + ctx);
        return std::pair<std::string, std::string>(std::string(item.substr(0, eq)),
                                                   std::string(item.substr(eq + 1)));
    };

    std::map<std::string, std::vector<double>> tensors;
    std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> shapes;
    std::map<std::string, std::vector<double>> adam_m, adam_v;
    int64_t adam_t = 0;
    bool ended = false;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = split_whitespace(line);
        const std::string& key = cols[0];
        if (key == "config") {
            for (size_t i = 1; i < cols.size(); ++i) {
                auto [k, v] = read_kv(cols[i], "config");
                TaggerConfig& c = snap.model.cfg;
                if (k == "embed_dim") c.embed_dim = static_cast<int>(parse_int(v, "config"));
                else if (k == "hidden_dim") c.hidden_dim = static_cast<int>(parse_int(v, "config"));
                else if (k == "context_window") c.context_window = static_cast<int>(parse_int(v, "config"));
                else if (k == "num_classes") c.num_classes = static_cast<int>(parse_int(v, "config"));
                else if (k == "decoder") c.decoder = decoder_from_name(v);
                else if (k == "optimizer") c.optimizer = optimizer_from_name(v);
                else if (k == "seed") c.seed = static_cast<uint64_t>(parse_int(v, "config"));
                else if (k == "learning_rate") c.learning_rate = parse_double(v, "config");
                else if (k == "epochs") c.epochs = static_cast<int>(parse_int(v, "config"));
                else if (k == "batch_size") c.batch_size = static_cast<int>(parse_int(v, "config"));
                else throw FormatError("checkpoint: unknown config key '" + k + "'");
            }
        } else if (key == "vocab_rows") {
            snap.model.vocab_rows = static_cast<int>(parse_int(cols.at(1), "vocab_rows"));
        } else if (key == "epoch") {
            snap.epoch = static_cast<int>(parse_int(cols.at(1), "epoch"));
        } else if (key == "tensor" || key == "adam_m" || key == "adam_v") {
            if (cols.size() < 4) throw FormatError("checkpoint: truncated tensor line");
            const std::string& name = cols[1];
            Eigen::Index rows = parse_int(cols[2], "tensor shape");
            Eigen::Index colsn = parse_int(cols[3], "tensor shape");
            if (static_cast<Eigen::Index>(cols.size()) != 4 + rows * colsn)
                throw FormatError("checkpoint: tensor '" + name + "' value count mismatch");
            std::vector<double> vals(static_cast<size_t>(rows * colsn));
            for (size_t i = 0; i < vals.size(); ++i)
                vals[i] = parse_double(cols[4 + i], "tensor " + name);
            if (key == "tensor") {
                tensors[name] = std::move(vals);
                shapes[name] = {rows, colsn};
            } else if (key == "adam_m") {
                adam_m[name] = std::move(vals);
            } else {
                adam_v[name] = std::move(vals);
            }
        } else if (key == "adam_t") {
            adam_t = parse_int(cols.at(1), "adam_t");
        } else if (key == "rng") {
            snap.rng_state = line.substr(4);
        } else if (key == "end") {
            ended = true;
            break;
        } else {
            throw FormatError("checkpoint: unknown line key '" + key + "'");
        }
    }
    if (!ended) throw FormatError("checkpoint: missing end marker");

    TaggerModel& m = snap.model;
    bool has_head = tensors.count("head_w") > 0;
    TaggerModel init = init_model(m.cfg, m.vocab_rows);
    init.cfg = m.cfg;
    m = std::move(init);
    for (auto& t : m.tensors()) {
        auto it = tensors.find(t.name);
        if (it == tensors.end()) throw FormatError(std::string("checkpoint: missing tensor ") + t.name);
        auto [rows, colsn] = shapes[t.name];
        if (rows != t.rows() || colsn != t.cols())
            throw FormatError(std::string("checkpoint: shape mismatch for ") + t.name);
        std::copy(it->second.begin(), it->second.end(), t.data());
    }
    if (has_head) {
        const auto& vals = tensors["head_w"];
        snap.head_w.resize(static_cast<Eigen::Index>(vals.size()));
        std::copy(vals.begin(), vals.end(), snap.head_w.data());
    }
    snap.adam = AdamState(m, has_head ? snap.head_w.size() : 0);
    snap.adam.set_step_count(adam_t);
    for (size_t i = 0; i < snap.adam.names().size(); ++i) {
        const std::string& name = snap.adam.names()[i];
        auto im = adam_m.find(name);
        auto iv = adam_v.find(name);
        if (im != adam_m.end())
            std::copy(im->second.begin(), im->second.end(), snap.adam.moment1()[i].data());
        if (iv != adam_v.end())
            std::copy(iv->second.begin(), iv->second.end(), snap.adam.moment2()[i].data());
    }
    return snap;
}

}  // namespace nerbias
