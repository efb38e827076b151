#pragma once

#include "recflex/models/common.hpp"

namespace recflex {

// Matrix factorization: score(u, i) = <p_u, q_i> + b_i.
// User bias is omitted; it cancels in pairwise losses.
template <typename T>
class BprMf final : public Scorer<T> {
public:
    BprMf(const Corpus& corpus, const ModelHyperparams& hp, Rng& rng)
        : n_users_(corpus.n_users), n_items_(corpus.n_items), dim_(hp.emb_size) {
        if (dim_ < 1) throw std::runtime_error("BPRMF requires emb_size >= 1");
        detail::init_normal(params_.add("user_emb", {n_users_, dim_}), rng);
        detail::init_normal(params_.add("item_emb", {n_items_, dim_}), rng);
        params_.add("item_bias", {n_items_});
    }

    std::string name() const override { return "BPRMF"; }
    ParamSet<T>* params() override { return &params_; }
    const Tensor<T>* item_embedding_table() const override {
        return &params_.get("item_emb");
    }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        detail::check_candidates(req, n_users_, n_items_);
        const auto& user_emb = params_.get("user_emb");
        const auto& item_emb = params_.get("item_emb");
        const auto& item_bias = params_.get("item_bias");
        const T* u = user_emb.row(req.user_id);
        std::vector<T> scores;
        scores.reserve(req.candidates.size());
        for (auto i : req.candidates) {
            const T* q = item_emb.row(i);
            T s = item_bias.value[static_cast<std::size_t>(i)];
            for (std::int64_t f = 0; f < dim_; ++f) s += u[f] * q[f];
            scores.push_back(s);
        }
        return scores;
    }

    void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) override {
        if (d_scores.size() != req.candidates.size())
            throw std::runtime_error("backward: d_scores shape mismatch");
        auto& user_emb = params_.get("user_emb");
        auto& item_emb = params_.get("item_emb");
        auto& item_bias = params_.get("item_bias");
        const T* u = user_emb.row(req.user_id);
        T* du = user_emb.grad_row(req.user_id);
        user_emb.mark(req.user_id);
        for (std::size_t c = 0; c < req.candidates.size(); ++c) {
            auto i = req.candidates[c];
            T d = d_scores[c];
            const T* q = item_emb.row(i);
            T* dq = item_emb.grad_row(i);
            for (std::int64_t f = 0; f < dim_; ++f) {
                du[f] += d * q[f];
                dq[f] += d * u[f];
            }
            item_bias.grad[static_cast<std::size_t>(i)] += d;
            item_emb.mark(i);
            item_bias.mark(i);
        }
    }

private:
    std::int32_t n_users_, n_items_;
    std::int64_t dim_;
    ParamSet<T> params_;
};

}  // namespace recflex
