#pragma once

#include <algorithm>
#include <numeric>

#include "recflex/models/common.hpp"

namespace recflex {

// List-aware re-ranker. Each candidate i of an impression becomes a row
//   x_i = [ backbone item embedding (d) | standardized base score (1)
//         | position embedding (d_p, position = backbone rank) ]
// which passes through one single-head self-attention block with a residual
// connection, followed by a one-hidden-layer ReLU scoring head:
//   A = rowsoftmax(X W_Q (X W_K)^T / sqrt(d_k)),  Z = X + (A X W_V) W_O
//   score_i = w2^T ReLU(W1 z_i + b1) + b2
template <typename T>
class PrmLite final : public Scorer<T> {
public:
    PrmLite(const Corpus& corpus, const ModelHyperparams& hp, Rng& rng)
        : n_users_(corpus.n_users),
          n_items_(corpus.n_items),
          base_dim_(hp.emb_size),
          pos_dim_(hp.position_emb_size),
          max_len_(hp.max_list_length) {
        if (base_dim_ < 1) throw std::runtime_error("PRMLite requires emb_size >= 1");
        if (pos_dim_ < 1 || max_len_ < 1)
            throw std::runtime_error("PRMLite requires positive position table sizes");
        if (hp.hidden_sizes.empty() || hp.hidden_sizes[0] < 1)
            throw std::runtime_error("PRMLite requires a positive hidden size");
        hidden_ = hp.hidden_sizes[0];
        din_ = base_dim_ + 1 + pos_dim_;
        dk_ = din_;
        detail::init_normal(params_.add("pos_emb", {max_len_, pos_dim_}), rng);
        detail::init_xavier_uniform(params_.add("W_Q", {din_, dk_}), rng, din_, dk_);
        detail::init_xavier_uniform(params_.add("W_K", {din_, dk_}), rng, din_, dk_);
        detail::init_xavier_uniform(params_.add("W_V", {din_, dk_}), rng, din_, dk_);
        detail::init_xavier_uniform(params_.add("W_O", {dk_, din_}), rng, dk_, din_);
        detail::init_xavier_uniform(params_.add("W1", {hidden_, din_}), rng, din_, hidden_);
        params_.add("b1", {hidden_});
        detail::init_xavier_uniform(params_.add("w2", {hidden_}), rng, hidden_, 1);
        params_.add("b2", {1});
    }

    std::string name() const override { return "PRMLite"; }
    ParamSet<T>* params() override { return &params_; }
    bool is_reranker() const override { return true; }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        Workspace ws;
        return run_forward(req, ws);
    }

    void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) override {
        const auto L = static_cast<std::int64_t>(req.candidates.size());
        if (d_scores.size() != req.candidates.size())
            throw std::runtime_error("backward: d_scores shape mismatch");
        Workspace ws;
        run_forward(req, ws);

        auto& pos_emb = params_.get("pos_emb");
        auto& W_Q = params_.get("W_Q");
        auto& W_K = params_.get("W_K");
        auto& W_V = params_.get("W_V");
        auto& W_O = params_.get("W_O");
        auto& W1 = params_.get("W1");
        auto& b1 = params_.get("b1");
        auto& w2 = params_.get("w2");
        auto& b2 = params_.get("b2");

        Matrix<T> dZ(L, din_), dX(L, din_);
        // scoring head
        for (std::int64_t i = 0; i < L; ++i) {
            T d = d_scores[static_cast<std::size_t>(i)];
            b2.grad[0] += d;
            const T* zi = ws.Z.row(i);
            for (std::int64_t k = 0; k < hidden_; ++k) {
                T pre = ws.head_pre.at(i, k);
                T act = pre > 0 ? pre : T(0);
                w2.grad[static_cast<std::size_t>(k)] += d * act;
                if (pre > 0) {
                    T dk = d * w2.value[static_cast<std::size_t>(k)];
                    b1.grad[static_cast<std::size_t>(k)] += dk;
                    T* dW1row = W1.grad_row(k);
                    const T* w1row = W1.row(k);
                    for (std::int64_t j = 0; j < din_; ++j) {
                        dW1row[j] += dk * zi[j];
                        dZ.at(i, j) += dk * w1row[j];
                    }
                }
            }
        }

        // Z = X + H W_O
        Matrix<T> dH(L, dk_);
        for (std::int64_t i = 0; i < L; ++i) {
            for (std::int64_t j = 0; j < din_; ++j) {
                T d = dZ.at(i, j);
                dX.at(i, j) += d;
                for (std::int64_t k = 0; k < dk_; ++k) {
                    dH.at(i, k) += d * W_O.value[static_cast<std::size_t>(k * din_ + j)];
                    W_O.grad[static_cast<std::size_t>(k * din_ + j)] += ws.H.at(i, k) * d;
                }
            }
        }

        // H = A V
        Matrix<T> dA(L, L), dV(L, dk_);
        for (std::int64_t i = 0; i < L; ++i) {
            for (std::int64_t j = 0; j < L; ++j) {
                T acc = 0;
                for (std::int64_t k = 0; k < dk_; ++k) {
                    acc += dH.at(i, k) * ws.V.at(j, k);
                    dV.at(j, k) += ws.A.at(i, j) * dH.at(i, k);
                }
                dA.at(i, j) = acc;
            }
        }

        // A = rowsoftmax(Q K^T / sqrt(dk))
        const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk_));
        Matrix<T> dQ(L, dk_), dK(L, dk_);
        for (std::int64_t i = 0; i < L; ++i) {
            T dot = 0;
            for (std::int64_t j = 0; j < L; ++j) dot += dA.at(i, j) * ws.A.at(i, j);
            for (std::int64_t j = 0; j < L; ++j) {
                T dS = ws.A.at(i, j) * (dA.at(i, j) - dot) * inv_sqrt_dk;
                for (std::int64_t k = 0; k < dk_; ++k) {
                    dQ.at(i, k) += dS * ws.K.at(j, k);
                    dK.at(j, k) += dS * ws.Q.at(i, k);
                }
            }
        }

        // Q/K/V projections
        auto project_back = [&](const Matrix<T>& dP, Tensor<T>& W) {
            for (std::int64_t i = 0; i < L; ++i) {
                const T* xi = ws.X.row(i);
                for (std::int64_t k = 0; k < dk_; ++k) {
                    T d = dP.at(i, k);
                    if (d == T(0)) continue;
                    for (std::int64_t j = 0; j < din_; ++j) {
                        W.grad[static_cast<std::size_t>(j * dk_ + k)] += xi[j] * d;
                        dX.at(i, j) += d * W.value[static_cast<std::size_t>(j * dk_ + k)];
                    }
                }
            }
        };
        project_back(dQ, W_Q);
        project_back(dK, W_K);
        project_back(dV, W_V);

        // only the position-embedding slice of X is learned
        for (std::int64_t i = 0; i < L; ++i) {
            std::int64_t p = ws.positions[static_cast<std::size_t>(i)];
            T* dp = pos_emb.grad_row(p);
            for (std::int64_t j = 0; j < pos_dim_; ++j)
                dp[j] += dX.at(i, base_dim_ + 1 + j);
            pos_emb.mark(p);
        }
        for (auto* t : {&W_Q, &W_K, &W_V, &W_O, &W1, &b1, &w2, &b2}) t->mark_all();
    }

private:
    struct Workspace {
        std::vector<std::int64_t> positions;
        Matrix<T> X, Q, K, V, A, H, Z, head_pre;
    };

    std::vector<T> run_forward(const ScoreRequest<T>& req, Workspace& ws) const {
        detail::check_candidates(req, n_users_, n_items_);
        if (!req.base_scores || !req.base_embeddings)
            throw std::runtime_error("PRMLite requires base scores and base embeddings");
        const auto L = static_cast<std::int64_t>(req.candidates.size());
        if (static_cast<std::int64_t>(req.base_scores->size()) != L ||
            req.base_embeddings->n_rows != L || req.base_embeddings->n_cols != base_dim_)
            throw std::runtime_error("PRMLite: base score/embedding shape mismatch");
        if (L > max_len_)
            throw std::runtime_error("impression longer than max_list_length");

        // per-list standardization of base scores
        const auto& b = *req.base_scores;
        T mean = std::accumulate(b.begin(), b.end(), T(0)) / static_cast<T>(L);
        T var = 0;
        for (T s : b) var += (s - mean) * (s - mean);
        var /= static_cast<T>(L);
        T stdev = var > 0 ? std::sqrt(var) : T(0);

        // position = backbone rank (descending base score, ties by item id)
        std::vector<std::int64_t> order(static_cast<std::size_t>(L));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t c) {
            if (b[static_cast<std::size_t>(a)] != b[static_cast<std::size_t>(c)])
                return b[static_cast<std::size_t>(a)] > b[static_cast<std::size_t>(c)];
            return req.candidates[static_cast<std::size_t>(a)] <
                   req.candidates[static_cast<std::size_t>(c)];
        });
        ws.positions.assign(static_cast<std::size_t>(L), 0);
        for (std::int64_t r = 0; r < L; ++r)
            ws.positions[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

        const auto& pos_emb = params_.get("pos_emb");
        ws.X = Matrix<T>(L, din_);
        for (std::int64_t i = 0; i < L; ++i) {
            T* xi = ws.X.row(i);
            const T* ei = req.base_embeddings->row(i);
            for (std::int64_t j = 0; j < base_dim_; ++j) xi[j] = ei[j];
            xi[base_dim_] =
                stdev > 0 ? (b[static_cast<std::size_t>(i)] - mean) / stdev : T(0);
            const T* pe = pos_emb.row(ws.positions[static_cast<std::size_t>(i)]);
            for (std::int64_t j = 0; j < pos_dim_; ++j) xi[base_dim_ + 1 + j] = pe[j];
        }

        auto project = [&](const Tensor<T>& W) {
            Matrix<T> out(L, dk_);
            for (std::int64_t i = 0; i < L; ++i) {
                const T* xi = ws.X.row(i);
                T* oi = out.row(i);
                for (std::int64_t j = 0; j < din_; ++j) {
                    T x = xi[j];
                    if (x == T(0)) continue;
                    const T* wrow = W.value.data() + j * dk_;
                    for (std::int64_t k = 0; k < dk_; ++k) oi[k] += x * wrow[k];
                }
            }
            return out;
        };
        ws.Q = project(params_.get("W_Q"));
        ws.K = project(params_.get("W_K"));
        ws.V = project(params_.get("W_V"));

        const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk_));
        ws.A = Matrix<T>(L, L);
        for (std::int64_t i = 0; i < L; ++i) {
            T mx = -std::numeric_limits<T>::infinity();
            for (std::int64_t j = 0; j < L; ++j) {
                T s = 0;
                for (std::int64_t k = 0; k < dk_; ++k) s += ws.Q.at(i, k) * ws.K.at(j, k);
                s *= inv_sqrt_dk;
                ws.A.at(i, j) = s;
                mx = std::max(mx, s);
            }
            T denom = 0;
            for (std::int64_t j = 0; j < L; ++j) {
                ws.A.at(i, j) = std::exp(ws.A.at(i, j) - mx);
                denom += ws.A.at(i, j);
            }
            for (std::int64_t j = 0; j < L; ++j) ws.A.at(i, j) /= denom;
        }

        ws.H = Matrix<T>(L, dk_);
        for (std::int64_t i = 0; i < L; ++i)
            for (std::int64_t j = 0; j < L; ++j) {
                T a = ws.A.at(i, j);
                if (a == T(0)) continue;
                const T* vj = ws.V.row(j);
                T* hi = ws.H.row(i);
                for (std::int64_t k = 0; k < dk_; ++k) hi[k] += a * vj[k];
            }

        const auto& W_O = params_.get("W_O");
        ws.Z = Matrix<T>(L, din_);
        for (std::int64_t i = 0; i < L; ++i) {
            const T* xi = ws.X.row(i);
            T* zi = ws.Z.row(i);
            for (std::int64_t j = 0; j < din_; ++j) zi[j] = xi[j];
            const T* hi = ws.H.row(i);
            for (std::int64_t k = 0; k < dk_; ++k) {
                T h = hi[k];
                if (h == T(0)) continue;
                const T* wrow = W_O.value.data() + k * din_;
                for (std::int64_t j = 0; j < din_; ++j) zi[j] += h * wrow[j];
            }
        }

        const auto& W1 = params_.get("W1");
        const auto& b1 = params_.get("b1");
        const auto& w2 = params_.get("w2");
        const auto& b2 = params_.get("b2");
        ws.head_pre = Matrix<T>(L, hidden_);
        std::vector<T> scores(static_cast<std::size_t>(L));
        for (std::int64_t i = 0; i < L; ++i) {
            const T* zi = ws.Z.row(i);
            T s = b2.value[0];
            for (std::int64_t k = 0; k < hidden_; ++k) {
                T pre = b1.value[static_cast<std::size_t>(k)];
                const T* w1row = W1.row(k);
                for (std::int64_t j = 0; j < din_; ++j) pre += w1row[j] * zi[j];
                ws.head_pre.at(i, k) = pre;
                if (pre > 0) s += w2.value[static_cast<std::size_t>(k)] * pre;
            }
            scores[static_cast<std::size_t>(i)] = s;
        }
        return scores;
    }

    std::int32_t n_users_, n_items_;
    std::int64_t base_dim_, pos_dim_, max_len_, hidden_ = 0, din_ = 0, dk_ = 0;
    ParamSet<T> params_;
};

}  // namespace recflex
