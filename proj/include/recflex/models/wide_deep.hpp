#pragma once

#include "recflex/models/common.hpp"

namespace recflex {

// Wide & Deep style CTR scorer: a linear model over the active features plus
// a two-hidden-layer ReLU MLP over their concatenated embeddings. The output
// is the raw sum; the CTR runner applies the sigmoid.
template <typename T>
class WideDeep final : public Scorer<T> {
public:
    WideDeep(const Corpus& corpus, const ModelHyperparams& hp, Rng& rng)
        : corpus_(&corpus), dim_(hp.emb_size) {
        if (dim_ < 1) throw std::runtime_error("WideDeep requires emb_size >= 1");
        if (hp.hidden_sizes.size() != 2 || hp.hidden_sizes[0] < 1 || hp.hidden_sizes[1] < 1)
            throw std::runtime_error("WideDeep requires two positive hidden sizes");
        h1_ = hp.hidden_sizes[0];
        h2_ = hp.hidden_sizes[1];
        fields_ = detail::build_fields(corpus, hp);
        input_dim_ = dim_ * static_cast<std::int64_t>(fields_.size());
        for (const auto& f : fields_) {
            wide_idx_.push_back(params_.size());
            detail::init_normal(params_.add("wide_" + f.name, {f.rows}), rng);
        }
        for (const auto& f : fields_) {
            emb_idx_.push_back(params_.size());
            detail::init_normal(params_.add("emb_" + f.name, {f.rows, dim_}), rng);
        }
        detail::init_xavier_uniform(params_.add("W1", {h1_, input_dim_}), rng, input_dim_, h1_);
        params_.add("b1", {h1_});
        detail::init_xavier_uniform(params_.add("W2", {h2_, h1_}), rng, h1_, h2_);
        params_.add("b2", {h2_});
        detail::init_xavier_uniform(params_.add("w_out", {h2_}), rng, h2_, 1);
        params_.add("b_out", {1});
    }

    std::string name() const override { return "WideDeep"; }
    ParamSet<T>* params() override { return &params_; }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        detail::check_candidates(req, corpus_->n_users, corpus_->n_items);
        std::vector<T> scores;
        scores.reserve(req.candidates.size());
        Workspace ws;
        for (auto item : req.candidates) scores.push_back(run_forward(req, item, ws));
        return scores;
    }

    void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) override {
        if (d_scores.size() != req.candidates.size())
            throw std::runtime_error("backward: d_scores shape mismatch");
        auto& W1 = params_.get("W1");
        auto& b1 = params_.get("b1");
        auto& W2 = params_.get("W2");
        auto& b2 = params_.get("b2");
        auto& w_out = params_.get("w_out");
        auto& b_out = params_.get("b_out");
        Workspace ws;
        for (std::size_t c = 0; c < req.candidates.size(); ++c) {
            auto item = req.candidates[c];
            T d = d_scores[c];
            run_forward(req, item, ws);  // refill activations

            // wide part
            for (std::size_t j = 0; j < fields_.size(); ++j) {
                auto& w = params_.tensors[wide_idx_[j]];
                w.grad[static_cast<std::size_t>(ws.active[j].first)] +=
                    d * ws.active[j].second;
                w.mark(ws.active[j].first);
            }
            b_out.grad[0] += d;
            b_out.mark(0);

            // output layer
            std::vector<T> da2(static_cast<std::size_t>(h2_));
            for (std::int64_t k = 0; k < h2_; ++k) {
                w_out.grad[static_cast<std::size_t>(k)] += d * ws.a2[static_cast<std::size_t>(k)];
                da2[static_cast<std::size_t>(k)] =
                    ws.z2[static_cast<std::size_t>(k)] > 0
                        ? d * w_out.value[static_cast<std::size_t>(k)]
                        : T(0);
            }
            w_out.mark_all();

            // second hidden layer
            std::vector<T> da1(static_cast<std::size_t>(h1_), T(0));
            for (std::int64_t k = 0; k < h2_; ++k) {
                T dk = da2[static_cast<std::size_t>(k)];
                if (dk == T(0)) continue;
                b2.grad[static_cast<std::size_t>(k)] += dk;
                const T* w2row = W2.row(k);
                T* dW2row = W2.grad_row(k);
                for (std::int64_t j = 0; j < h1_; ++j) {
                    dW2row[j] += dk * ws.a1[static_cast<std::size_t>(j)];
                    da1[static_cast<std::size_t>(j)] += dk * w2row[j];
                }
            }
            W2.mark_all();
            b2.mark_all();

            // first hidden layer
            std::vector<T> dx(static_cast<std::size_t>(input_dim_), T(0));
            for (std::int64_t k = 0; k < h1_; ++k) {
                T dk = ws.z1[static_cast<std::size_t>(k)] > 0
                           ? da1[static_cast<std::size_t>(k)]
                           : T(0);
                if (dk == T(0)) continue;
                b1.grad[static_cast<std::size_t>(k)] += dk;
                const T* w1row = W1.row(k);
                T* dW1row = W1.grad_row(k);
                for (std::int64_t j = 0; j < input_dim_; ++j) {
                    dW1row[j] += dk * ws.x[static_cast<std::size_t>(j)];
                    dx[static_cast<std::size_t>(j)] += dk * w1row[j];
                }
            }
            W1.mark_all();
            b1.mark_all();

            // embeddings
            for (std::size_t j = 0; j < fields_.size(); ++j) {
                auto& emb = params_.tensors[emb_idx_[j]];
                T* de = emb.grad_row(ws.active[j].first);
                T x = ws.active[j].second;
                for (std::int64_t f = 0; f < dim_; ++f)
                    de[f] += dx[j * static_cast<std::size_t>(dim_) +
                                static_cast<std::size_t>(f)] *
                             x;
                emb.mark(ws.active[j].first);
            }
        }
    }

private:
    struct Workspace {
        std::vector<std::pair<std::int64_t, T>> active;
        std::vector<T> x, z1, a1, z2, a2;
    };

    T run_forward(const ScoreRequest<T>& req, std::int32_t item, Workspace& ws) const {
        ws.active.clear();
        for (const auto& f : fields_)
            ws.active.push_back(
                detail::field_activation<T>(f, *corpus_, req.user_id, item, req.situation));

        ws.x.assign(static_cast<std::size_t>(input_dim_), T(0));
        T wide = params_.get("b_out").value[0];
        for (std::size_t j = 0; j < fields_.size(); ++j) {
            auto [row, xval] = ws.active[j];
            wide += params_.tensors[wide_idx_[j]].value[static_cast<std::size_t>(row)] * xval;
            const T* e = params_.tensors[emb_idx_[j]].row(row);
            for (std::int64_t f = 0; f < dim_; ++f)
                ws.x[j * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(f)] =
                    e[f] * xval;
        }

        const auto& W1 = params_.get("W1");
        const auto& b1 = params_.get("b1");
        ws.z1.assign(static_cast<std::size_t>(h1_), T(0));
        ws.a1.assign(static_cast<std::size_t>(h1_), T(0));
        for (std::int64_t k = 0; k < h1_; ++k) {
            T z = b1.value[static_cast<std::size_t>(k)];
            const T* row = W1.row(k);
            for (std::int64_t j = 0; j < input_dim_; ++j)
                z += row[j] * ws.x[static_cast<std::size_t>(j)];
            ws.z1[static_cast<std::size_t>(k)] = z;
            ws.a1[static_cast<std::size_t>(k)] = z > 0 ? z : T(0);
        }
        const auto& W2 = params_.get("W2");
        const auto& b2 = params_.get("b2");
        ws.z2.assign(static_cast<std::size_t>(h2_), T(0));
        ws.a2.assign(static_cast<std::size_t>(h2_), T(0));
        for (std::int64_t k = 0; k < h2_; ++k) {
            T z = b2.value[static_cast<std::size_t>(k)];
            const T* row = W2.row(k);
            for (std::int64_t j = 0; j < h1_; ++j)
                z += row[j] * ws.a1[static_cast<std::size_t>(j)];
            ws.z2[static_cast<std::size_t>(k)] = z;
            ws.a2[static_cast<std::size_t>(k)] = z > 0 ? z : T(0);
        }
        const auto& w_out = params_.get("w_out");
        T deep = 0;
        for (std::int64_t k = 0; k < h2_; ++k)
            deep += w_out.value[static_cast<std::size_t>(k)] * ws.a2[static_cast<std::size_t>(k)];
        return wide + deep;
    }

    const Corpus* corpus_;
    std::int64_t dim_, h1_ = 0, h2_ = 0, input_dim_ = 0;
    std::vector<detail::FeatureField> fields_;
    std::vector<std::size_t> wide_idx_, emb_idx_;
    ParamSet<T> params_;
};

}  // namespace recflex
