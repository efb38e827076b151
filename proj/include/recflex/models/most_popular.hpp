#pragma once

#include "recflex/models/common.hpp"

namespace recflex {

// Non-trainable baseline: score(item) = positive train interaction count.
template <typename T>
class MostPopular final : public Scorer<T> {
public:
    explicit MostPopular(const Corpus& corpus)
        : n_users_(corpus.n_users), counts_(corpus.item_train_count) {}

    std::string name() const override { return "MostPopular"; }

    std::vector<T> forward(const ScoreRequest<T>& req) const override {
        detail::check_candidates(req, n_users_, static_cast<std::int32_t>(counts_.size()));
        std::vector<T> scores;
        scores.reserve(req.candidates.size());
        for (auto i : req.candidates)
            scores.push_back(static_cast<T>(counts_[static_cast<std::size_t>(i)]));
        return scores;
    }

    void backward(const ScoreRequest<T>&, const std::vector<T>&) override {}

private:
    std::int32_t n_users_;
    std::vector<std::int64_t> counts_;
};

}  // namespace recflex
