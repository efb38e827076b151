#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "recflex/losses.hpp"
#include "recflex/models/scorer.hpp"
#include "recflex/rng.hpp"
#include "recflex/tensor.hpp"

namespace recflex {

enum class OptimizerKind { SGD, Adam };

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "SGD" || s == "sgd") return OptimizerKind::SGD;
    if (s == "Adam" || s == "adam") return OptimizerKind::Adam;
    throw std::runtime_error("unknown optimizer: " + s);
}

template <typename T>
class Optimizer {
public:
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-3;
    double l2 = 0.0;
    bool full_l2 = false;  // default: L2 only on rows touched this step
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    Optimizer() = default;
    Optimizer(OptimizerKind kind, double lr, double l2) : kind(kind), lr(lr), l2(l2) {}

    void attach(const ParamSet<T>& params) {
        step_count_ = 0;
        m_.clear();
        v_.clear();
        if (kind == OptimizerKind::Adam) {
            for (const auto& t : params.tensors) {
                m_.emplace_back(t.value.size(), 0.0);
                v_.emplace_back(t.value.size(), 0.0);
            }
        }
    }

    std::int64_t step_count() const { return step_count_; }

    // Applies one update from the accumulated gradients, then zeroes them.
    void step(ParamSet<T>& params) {
        for (std::size_t ti = 0; ti < params.size(); ++ti) {
            for (T g : params.tensors[ti].grad)
                if (!std::isfinite(static_cast<double>(g)))
                    throw std::runtime_error("non-finite gradient in parameter " +
                                             params.names[ti]);
        }
        ++step_count_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
        for (std::size_t ti = 0; ti < params.size(); ++ti) {
            auto& t = params.tensors[ti];
            if (l2 != 0.0) {
                const std::int64_t rs = t.row_size();
                for (std::int64_t r = 0; r < t.rows(); ++r) {
                    if (!full_l2 && !t.touched[static_cast<std::size_t>(r)]) continue;
                    T* val = t.row(r);
                    T* grd = t.grad_row(r);
                    for (std::int64_t c = 0; c < rs; ++c)
                        grd[c] += static_cast<T>(l2) * val[c];
                }
            }
            if (kind == OptimizerKind::SGD) {
                for (std::size_t i = 0; i < t.value.size(); ++i)
                    t.value[i] -= static_cast<T>(lr * static_cast<double>(t.grad[i]));
            } else {
                auto& m = m_[ti];
                auto& v = v_[ti];
                for (std::size_t i = 0; i < t.value.size(); ++i) {
                    double g = static_cast<double>(t.grad[i]);
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    double mhat = m[i] / bc1;
                    double vhat = v[i] / bc2;
                    t.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
                }
            }
            t.zero_grad();
        }
    }

private:
    std::int64_t step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;  // Adam moments, kept in double
};

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.

struct GradCheckTrial {
    ScoreRequest<double> req;
    std::vector<std::int8_t> labels;  // parallel to req.candidates
};

using TrialSampler = std::function<GradCheckTrial(Rng&)>;
// Maps candidate scores (and labels) to (loss, d_loss/d_scores).
using LossOnScores =
    std::function<ListLossResult(const std::vector<double>&, const std::vector<std::int8_t>&)>;

struct GradCheckReport {
    bool has_params = false;
    double max_rel_err = 0.0;
    std::int64_t n_coords_checked = 0;
    std::int64_t n_trials = 0;

    bool pass(double tol) const { return !has_params || max_rel_err <= tol; }
};

// Compares analytic parameter gradients of loss(forward(req)) against central
// finite differences on a random subset of touched coordinates.
inline GradCheckReport grad_check(Scorer<double>& scorer, const LossOnScores& loss,
                                  const TrialSampler& sampler, int n_trials, double h,
                                  Rng& rng, int coords_per_trial = 24) {
    GradCheckReport report;
    ParamSet<double>* params = scorer.params();
    if (!params) return report;  // "no parameters"
    report.has_params = true;

    auto eval_loss = [&](const ScoreRequest<double>& req,
                         const std::vector<std::int8_t>& labels) {
        auto scores = scorer.forward(req);
        return loss(scores, labels);
    };

    for (int trial = 0; trial < n_trials; ++trial) {
        GradCheckTrial t = sampler(rng);
        params->zero_grads();
        auto scores = scorer.forward(t.req);
        ListLossResult res = loss(scores, t.labels);
        if (res.skipped) continue;
        scorer.backward(t.req, res.grad);
        ++report.n_trials;

        // candidate coordinates: everything in touched rows
        std::vector<std::pair<std::size_t, std::size_t>> coords;  // (tensor, flat index)
        for (std::size_t ti = 0; ti < params->size(); ++ti) {
            const auto& tensor = params->tensors[ti];
            const std::int64_t rs = tensor.row_size();
            for (std::int64_t r = 0; r < tensor.rows(); ++r) {
                if (!tensor.touched[static_cast<std::size_t>(r)]) continue;
                for (std::int64_t c = 0; c < rs; ++c)
                    coords.emplace_back(ti, static_cast<std::size_t>(r * rs + c));
            }
        }
        if (coords.empty()) continue;
        rng.shuffle(coords);
        std::size_t n_check = std::min<std::size_t>(coords.size(),
                                                    static_cast<std::size_t>(coords_per_trial));
        for (std::size_t ci = 0; ci < n_check; ++ci) {
            auto [ti, idx] = coords[ci];
            auto& tensor = params->tensors[ti];
            double analytic = tensor.grad[idx];
            double saved = tensor.value[idx];
            tensor.value[idx] = saved + h;
            double lp = eval_loss(t.req, t.labels).loss;
            tensor.value[idx] = saved - h;
            double lm = eval_loss(t.req, t.labels).loss;
            tensor.value[idx] = saved;
            double numeric = (lp - lm) / (2.0 * h);
            double diff = std::abs(analytic - numeric);
            // below FD resolution both sides agree with zero
            double err = diff <= 1e-10
                             ? 0.0
                             : diff / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, err);
            ++report.n_coords_checked;
        }
        params->zero_grads();
    }
    return report;
}

}  // namespace recflex
