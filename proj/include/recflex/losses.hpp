#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace recflex {

struct ScoredList {
    std::vector<double> scores;
    std::vector<std::int8_t> labels;  // binary

    std::size_t size() const { return scores.size(); }
    int n_positive() const {
        int n = 0;
        for (auto l : labels) n += (l == 1);
        return n;
    }
};

inline constexpr double kProbClip = 1e-7;

inline double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct PairLossResult {
    double loss = 0;
    double d_pos = 0;
    double d_neg = 0;
};

// -ln sigma(s_pos - s_neg)
inline PairLossResult bpr_pair(double s_pos, double s_neg) {
    double delta = s_pos - s_neg;
    PairLossResult r;
    r.loss = softplus(-delta);
    r.d_pos = sigmoid(delta) - 1.0;
    r.d_neg = -r.d_pos;
    return r;
}

struct ListLossResult {
    bool skipped = false;  // list not usable for this loss (see per-loss rules)
    double loss = 0;
    std::vector<double> grad;
};

// Mean of -ln sigma(s_p - s_n) over all in-list positive-negative pairs.
// Lists without at least one positive and one negative are skipped.
inline ListLossResult list_bpr(const ScoredList& list) {
    ListLossResult r;
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < list.size(); ++i)
        (list.labels[i] == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) {
        r.skipped = true;
        return r;
    }
    r.grad.assign(list.size(), 0.0);
    double n_pairs = static_cast<double>(pos.size()) * static_cast<double>(neg.size());
    for (auto p : pos) {
        for (auto n : neg) {
            auto pr = bpr_pair(list.scores[p], list.scores[n]);
            r.loss += pr.loss;
            r.grad[p] += pr.d_pos / n_pairs;
            r.grad[n] += pr.d_neg / n_pairs;
        }
    }
    r.loss /= n_pairs;
    return r;
}

namespace detail {

inline std::vector<double> stable_softmax(const std::vector<double>& scores) {
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    std::vector<double> p(scores.size());
    double denom = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] - mx);
        denom += p[i];
    }
    for (auto& v : p) v /= denom;
    return p;
}

}  // namespace detail

// -(1/P) sum over positives of ln softmax(s)_p
inline ListLossResult softmax_ce(const ScoredList& list) {
    ListLossResult r;
    int n_pos = list.n_positive();
    if (n_pos == 0) {
        r.skipped = true;
        return r;
    }
    auto p = detail::stable_softmax(list.scores);
    r.grad.assign(list.size(), 0.0);
    double inv_p = 1.0 / static_cast<double>(n_pos);
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (list.labels[i] == 1) r.loss -= std::log(p[i]) * inv_p;
        r.grad[i] = p[i] - (list.labels[i] == 1 ? inv_p : 0.0);
    }
    return r;
}

// Cross-entropy against the normalized binary label distribution.
inline ListLossResult listnet(const ScoredList& list) {
    ListLossResult r;
    int n_pos = list.n_positive();
    if (n_pos == 0) {
        r.skipped = true;
        return r;
    }
    auto p = detail::stable_softmax(list.scores);
    r.grad.assign(list.size(), 0.0);
    double t = 1.0 / static_cast<double>(n_pos);
    for (std::size_t i = 0; i < list.size(); ++i) {
        double target = list.labels[i] == 1 ? t : 0.0;
        if (target > 0) r.loss -= target * std::log(p[i]);
        r.grad[i] = p[i] - target;
    }
    return r;
}

struct BceResult {
    double loss = 0;
    double d_p = 0;
};

// Binary cross-entropy on a probability; inputs are clipped to
// [kProbClip, 1-kProbClip] and the gradient is zero outside the clip band.
inline BceResult bce(double p, int y) {
    if (y != 0 && y != 1) throw std::invalid_argument("bce label must be 0 or 1");
    BceResult r;
    bool clipped = p < kProbClip || p > 1.0 - kProbClip;
    double pc = std::min(std::max(p, kProbClip), 1.0 - kProbClip);
    r.loss = -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
    r.d_p = clipped ? 0.0 : (pc - y) / (pc * (1.0 - pc));
    return r;
}

}  // namespace recflex
