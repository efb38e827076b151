#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "recflex/tensor.hpp"

namespace recflex {

// One scoring call: a user, a candidate set, and whatever side information
// the model consumes. base_* fields are present only for re-rankers.
template <typename T>
struct ScoreRequest {
    std::int32_t user_id = 0;
    std::vector<std::int32_t> candidates;
    std::vector<std::int32_t> history;  // chronological, oldest first
    std::vector<T> situation;           // aligned to schema situation features
    const std::vector<T>* base_scores = nullptr;
    const Matrix<T>* base_embeddings = nullptr;  // |candidates| x d
};

struct ModelHyperparams {
    int emb_size = 64;
    std::vector<int> hidden_sizes = {64, 64};  // MLP hidden layers
    int position_emb_size = 8;                 // re-ranker position embedding
    int max_list_length = 100;                 // re-ranker position table size
    bool include_user_features = false;
    bool include_item_features = false;
    bool include_situation_features = false;
};

// Trainable model with explicit parameter gradients. forward is const and
// parallel-safe; backward accumulates into the gradient buffers and must be
// called by a single writer per step.
template <typename T>
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::string name() const = 0;
    virtual std::vector<T> forward(const ScoreRequest<T>& req) const = 0;
    virtual void backward(const ScoreRequest<T>& req, const std::vector<T>& d_scores) = 0;

    // nullptr for non-trainable models
    virtual ParamSet<T>* params() { return nullptr; }
    const ParamSet<T>* params() const { return const_cast<Scorer*>(this)->params(); }
    bool trainable() const { return const_cast<Scorer*>(this)->params() != nullptr; }

    virtual bool is_reranker() const { return false; }
    // Item embedding table exposed to re-rankers; nullptr if the model has none.
    virtual const Tensor<T>* item_embedding_table() const { return nullptr; }
};

}  // namespace recflex
