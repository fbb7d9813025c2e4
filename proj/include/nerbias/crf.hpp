#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "nerbias/common.hpp"

namespace nerbias {

inline double logsumexp(const Eigen::VectorXd& v) {
    double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
}

// Linear-chain scores: emissions (N x C), transitions (C x C, row = from),
// start/stop unary scores on the first/last position.

inline double crf_log_partition(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans,
                                const Eigen::VectorXd& start, const Eigen::VectorXd& stop) {
    const auto n = emissions.rows();
    const auto c = emissions.cols();
    Eigen::VectorXd alpha = start + emissions.row(0).transpose();
    for (Eigen::Index i = 1; i < n; ++i) {
        Eigen::VectorXd next(c);
        for (Eigen::Index b = 0; b < c; ++b)
            next(b) = logsumexp(alpha + trans.col(b)) + emissions(i, b);
        alpha = next;
    }
    return logsumexp(alpha + stop);
}

inline double crf_path_score(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans,
                             const Eigen::VectorXd& start, const Eigen::VectorXd& stop,
                             const std::vector<int>& path) {
    double s = start(path.front()) + emissions(0, path.front());
    for (size_t i = 1; i < path.size(); ++i)
        s += trans(path[i - 1], path[i]) + emissions(static_cast<Eigen::Index>(i), path[i]);
    return s + stop(path.back());
}

inline double crf_nll(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans,
                      const Eigen::VectorXd& start, const Eigen::VectorXd& stop,
                      const std::vector<int>& gold) {
    return crf_log_partition(emissions, trans, start, stop) -
           crf_path_score(emissions, trans, start, stop, gold);
}

struct CrfBackward {
    double nll = 0.0;
    Eigen::MatrixXd d_emissions;
    Eigen::MatrixXd d_trans;
    Eigen::VectorXd d_start;
    Eigen::VectorXd d_stop;
};

// NLL and its exact gradients via forward-backward marginals.
inline CrfBackward crf_nll_backward(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans,
                                    const Eigen::VectorXd& start, const Eigen::VectorXd& stop,
                                    const std::vector<int>& gold) {
    const auto n = emissions.rows();
    const auto c = emissions.cols();

    Eigen::MatrixXd alpha(n, c), beta(n, c);
    alpha.row(0) = (start + emissions.row(0).transpose()).transpose();
    for (Eigen::Index i = 1; i < n; ++i)
        for (Eigen::Index b = 0; b < c; ++b)
            alpha(i, b) = logsumexp(alpha.row(i - 1).transpose() + trans.col(b)) + emissions(i, b);
    beta.row(n - 1) = stop.transpose();
    for (Eigen::Index i = n - 2; i >= 0; --i)
        for (Eigen::Index a = 0; a < c; ++a)
            beta(i, a) = logsumexp(trans.row(a).transpose() +
                                   emissions.row(i + 1).transpose() +
                                   beta.row(i + 1).transpose());
    const double log_z = logsumexp(alpha.row(n - 1).transpose() + stop);

    CrfBackward out;
    out.nll = log_z - crf_path_score(emissions, trans, start, stop, gold);
    out.d_emissions = Eigen::MatrixXd::Zero(n, c);
    out.d_trans = Eigen::MatrixXd::Zero(c, c);
    out.d_start = Eigen::VectorXd::Zero(c);
    out.d_stop = Eigen::VectorXd::Zero(c);

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index b = 0; b < c; ++b)
            out.d_emissions(i, b) = std::exp(alpha(i, b) + beta(i, b) - log_z);
    for (Eigen::Index i = 1; i < n; ++i)
        for (Eigen::Index a = 0; a < c; ++a)
            for (Eigen::Index b = 0; b < c; ++b)
                out.d_trans(a, b) += std::exp(alpha(i - 1, a) + trans(a, b) + emissions(i, b) +
                                              beta(i, b) - log_z);
    for (Eigen::Index b = 0; b < c; ++b) {
        out.d_start(b) = std::exp(start(b) + emissions(0, b) + beta(0, b) - log_z);
        out.d_stop(b) = std::exp(alpha(n - 1, b) + stop(b) - log_z);
    }

    out.d_emissions(0, gold[0]) -= 1.0;
    out.d_start(gold.front()) -= 1.0;
    out.d_stop(gold.back()) -= 1.0;
    for (Eigen::Index i = 1; i < n; ++i) {
        out.d_emissions(i, gold[i]) -= 1.0;
        out.d_trans(gold[i - 1], gold[i]) -= 1.0;
    }
    return out;
}

// Best-scoring path; ties at every maximization break toward the lowest
// class index.
inline std::vector<int> viterbi_decode(const Eigen::MatrixXd& emissions,
                                       const Eigen::MatrixXd& trans,
                                       const Eigen::VectorXd& start, const Eigen::VectorXd& stop) {
    const auto n = emissions.rows();
    const auto c = emissions.cols();
    Eigen::MatrixXd score(n, c);
    Eigen::MatrixXi back(n, c);
    score.row(0) = (start + emissions.row(0).transpose()).transpose();
    back.row(0).setConstant(-1);
    for (Eigen::Index i = 1; i < n; ++i) {
        for (Eigen::Index b = 0; b < c; ++b) {
            double best = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (Eigen::Index a = 0; a < c; ++a) {
                double s = score(i - 1, a) + trans(a, b);
                if (s > best) {
                    best = s;
                    arg = static_cast<int>(a);
                }
            }
            score(i, b) = best + emissions(i, b);
            back(i, b) = arg;
        }
    }
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index b = 0; b < c; ++b) {
        double s = score(n - 1, b) + stop(b);
        if (s > best) {
            best = s;
            arg = static_cast<int>(b);
        }
    }
    std::vector<int> path(n);
    path[n - 1] = arg;
    for (Eigen::Index i = n - 1; i > 0; --i) path[i - 1] = back(i, path[i]);
    return path;
}

}  // namespace nerbias
