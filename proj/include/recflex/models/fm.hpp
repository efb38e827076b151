#pragma once

#include "recflex/models/common.hpp"

namespace recflex {

// Factorization machine over the active features of one (user, item,
// situation) triple: user id, item id, each categorical context feature as a
// one-hot index, each numeric context feature as a value-weighted feature.
//
//   y = w0 + sum_j w_j x_j
//       + 1/2 sum_f [ (sum_j v_jf x_j)^2 - sum_j v_jf^2 x_j^2 ]
//
// emb_size = 0 drops the pairwise term entirely (linear-only ablation).
template <typename T>
class Fm final : public Scorer<T> {
public:
    Fm(const Corpus& corpus, const ModelHyperparams& hp, Rng& rng)
        : corpus_(&corpus), dim_(hp.emb_size) {
        if (dim_ < 0) throw std::runtime_error("FM requires emb_size >= 0");
        fields_ = detail::build_fields(corpus, hp);
        params_.add("w0", {1});
        for (const auto& f : fields_) {
            w_idx_.push_back(params_.size());
            detail::init_normal(params_.add("w_" + f.name, {f.rows}), rng);
        }
        if (dim_ > 0) {
            for (const auto& f : fields_) {
                v_idx_.push_back(params_.size());
                detail::init_normal(params_.add("v_" + f.name, {f.rows, dim_}), rng);
            }
        }
    }

    std::string name() const override { return "FM"; }
    ParamSet<T>* params() override { return &params_; }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        detail::check_candidates(req, corpus_->n_users, corpus_->n_items);
        std::vector<T> scores;
        scores.reserve(req.candidates.size());
        for (auto item : req.candidates) {
            auto active = activations(req, item);
            T s = params_.get("w0").value[0];
            for (std::size_t j = 0; j < fields_.size(); ++j)
                s += params_.tensors[w_idx_[j]]
                         .value[static_cast<std::size_t>(active[j].first)] *
                     active[j].second;
            if (dim_ > 0) {
                for (std::int64_t f = 0; f < dim_; ++f) {
                    T sum = 0, sumsq = 0;
                    for (std::size_t j = 0; j < fields_.size(); ++j) {
                        T vx = params_.tensors[v_idx_[j]].row(active[j].first)[f] *
                               active[j].second;
                        sum += vx;
                        sumsq += vx * vx;
                    }
                    s += T(0.5) * (sum * sum - sumsq);
                }
            }
            scores.push_back(s);
        }
        return scores;
    }

    void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) override {
        if (d_scores.size() != req.candidates.size())
            throw std::runtime_error("backward: d_scores shape mismatch");
        auto& w0 = params_.get("w0");
        for (std::size_t c = 0; c < req.candidates.size(); ++c) {
            T d = d_scores[c];
            auto active = activations(req, req.candidates[c]);
            w0.grad[0] += d;
            w0.mark(0);
            for (std::size_t j = 0; j < fields_.size(); ++j) {
                auto& w = params_.tensors[w_idx_[j]];
                w.grad[static_cast<std::size_t>(active[j].first)] += d * active[j].second;
                w.mark(active[j].first);
            }
            if (dim_ > 0) {
                for (std::int64_t f = 0; f < dim_; ++f) {
                    T sum = 0;
                    for (std::size_t j = 0; j < fields_.size(); ++j)
                        sum += params_.tensors[v_idx_[j]].row(active[j].first)[f] *
                               active[j].second;
                    for (std::size_t j = 0; j < fields_.size(); ++j) {
                        auto& v = params_.tensors[v_idx_[j]];
                        T x = active[j].second;
                        T vj = v.row(active[j].first)[f];
                        v.grad_row(active[j].first)[f] += d * x * (sum - vj * x);
                        v.mark(active[j].first);
                    }
                }
            }
        }
    }

private:
    std::vector<std::pair<std::int64_t, T>> activations(const ScoreRequest<T>& req,
                                                        std::int32_t item) const {
        std::vector<std::pair<std::int64_t, T>> out;
        out.reserve(fields_.size());
        for (const auto& f : fields_)
            out.push_back(
                detail::field_activation<T>(f, *corpus_, req.user_id, item, req.situation));
        return out;
    }

    const Corpus* corpus_;
    std::int64_t dim_;
    std::vector<detail::FeatureField> fields_;
    std::vector<std::size_t> w_idx_, v_idx_;
    ParamSet<T> params_;
};

}  // namespace recflex
