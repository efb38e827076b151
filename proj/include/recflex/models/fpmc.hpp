#pragma once

#include "recflex/models/common.hpp"

namespace recflex {

// Factorized personalized Markov chain:
//   score(u, i | last item l) = <p_u, q_i> + <w_l, z_i>
// with independent factor tables; the transition term is omitted when the
// history is empty.
template <typename T>
class Fpmc final : public Scorer<T> {
public:
    Fpmc(const Corpus& corpus, const ModelHyperparams& hp, Rng& rng)
        : n_users_(corpus.n_users), n_items_(corpus.n_items), dim_(hp.emb_size) {
        if (dim_ < 1) throw std::runtime_error("FPMC requires emb_size >= 1");
        detail::init_normal(params_.add("user_emb", {n_users_, dim_}), rng);
        detail::init_normal(params_.add("item_emb", {n_items_, dim_}), rng);
        detail::init_normal(params_.add("prev_emb", {n_items_, dim_}), rng);
        detail::init_normal(params_.add("next_emb", {n_items_, dim_}), rng);
    }

    std::string name() const override { return "FPMC"; }
    ParamSet<T>* params() override { return &params_; }
    const Tensor<T>* item_embedding_table() const override {
        return &params_.get("item_emb");
    }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        detail::check_candidates(req, n_users_, n_items_);
        const T* u = params_.get("user_emb").row(req.user_id);
        const auto& item_emb = params_.get("item_emb");
        const auto& next_emb = params_.get("next_emb");
        const T* w = nullptr;
        if (!req.history.empty()) w = params_.get("prev_emb").row(req.history.back());
        std::vector<T> scores;
        scores.reserve(req.candidates.size());
        for (auto i : req.candidates) {
            const T* q = item_emb.row(i);
            T s = 0;
            for (std::int64_t f = 0; f < dim_; ++f) s += u[f] * q[f];
            if (w) {
                const T* z = next_emb.row(i);
                for (std::int64_t f = 0; f < dim_; ++f) s += w[f] * z[f];
            }
            scores.push_back(s);
        }
        return scores;
    }

    void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) override {
        if (d_scores.size() != req.candidates.size())
            throw std::runtime_error("backward: d_scores shape mismatch");
        auto& user_emb = params_.get("user_emb");
        auto& item_emb = params_.get("item_emb");
        auto& prev_emb = params_.get("prev_emb");
        auto& next_emb = params_.get("next_emb");
        const T* u = user_emb.row(req.user_id);
        T* du = user_emb.grad_row(req.user_id);
        user_emb.mark(req.user_id);
        const T* w = nullptr;
        T* dw = nullptr;
        if (!req.history.empty()) {
            auto last = req.history.back();
            w = prev_emb.row(last);
            dw = prev_emb.grad_row(last);
            prev_emb.mark(last);
        }
        for (std::size_t c = 0; c < req.candidates.size(); ++c) {
            auto i = req.candidates[c];
            T d = d_scores[c];
            const T* q = item_emb.row(i);
            T* dq = item_emb.grad_row(i);
            item_emb.mark(i);
            for (std::int64_t f = 0; f < dim_; ++f) {
                du[f] += d * q[f];
                dq[f] += d * u[f];
            }
            if (w) {
                const T* z = next_emb.row(i);
                T* dz = next_emb.grad_row(i);
                next_emb.mark(i);
                for (std::int64_t f = 0; f < dim_; ++f) {
                    dw[f] += d * z[f];
                    dz[f] += d * w[f];
                }
            }
        }
    }

private:
    std::int32_t n_users_, n_items_;
    std::int64_t dim_;
    ParamSet<T> params_;
};

}  // namespace recflex
