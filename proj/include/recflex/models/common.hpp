#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "recflex/models/scorer.hpp"
#include "recflex/rng.hpp"
#include "recflex/tensor.hpp"
#include "recflex/types.hpp"

namespace recflex {
namespace detail {

template <typename T>
void init_normal(Tensor<T>& t, Rng& rng, double stddev = 0.01) {
    for (auto& v : t.value) v = static_cast<T>(rng.normal(0.0, stddev));
}

template <typename T>
void init_xavier_uniform(Tensor<T>& t, Rng& rng, std::int64_t fan_in,
                         std::int64_t fan_out) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : t.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void check_candidates(const ScoreRequest<T>& req, std::int32_t n_users,
                      std::int32_t n_items) {
    if (req.candidates.empty()) throw std::runtime_error("empty candidate set");
    if (req.user_id < 0 || req.user_id >= n_users)
        throw std::runtime_error("user id out of range: " + std::to_string(req.user_id));
    for (auto i : req.candidates)
        if (i < 0 || i >= n_items)
            throw std::runtime_error("item id out of range: " + std::to_string(i));
    for (auto i : req.history)
        if (i < 0 || i >= n_items)
            throw std::runtime_error("history item out of range: " + std::to_string(i));
}

// One feature field of a context-aware model: the user id, the item id, or
// one schema feature. Categorical fields activate one row of their table with
// x=1; numeric fields activate row 0 with x equal to the standardized value.
struct FeatureField {
    enum class Source { UserId, ItemId, UserFeature, ItemFeature, SituationFeature };
    Source source;
    std::string name;        // parameter suffix
    std::size_t column = 0;  // index into the per-scope feature vector
    bool categorical = true;
    std::int64_t rows = 0;
};

inline std::vector<FeatureField> build_fields(const Corpus& corpus,
                                              const ModelHyperparams& hp) {
    std::vector<FeatureField> fields;
    fields.push_back({FeatureField::Source::UserId, "user", 0, true, corpus.n_users});
    fields.push_back({FeatureField::Source::ItemId, "item", 0, true, corpus.n_items});
    std::size_t user_col = 0, item_col = 0, situ_col = 0;
    for (const auto& f : corpus.schema.features) {
        FeatureField field;
        field.name = f.name;
        field.categorical = f.categorical;
        field.rows = f.categorical ? f.cardinality : 1;
        bool include = false;
        switch (f.scope) {
            case FeatureScope::User:
                field.source = FeatureField::Source::UserFeature;
                field.column = user_col++;
                include = hp.include_user_features;
                break;
            case FeatureScope::Item:
                field.source = FeatureField::Source::ItemFeature;
                field.column = item_col++;
                include = hp.include_item_features;
                break;
            case FeatureScope::Situation:
                field.source = FeatureField::Source::SituationFeature;
                field.column = situ_col++;
                include = hp.include_situation_features;
                break;
        }
        if (include) fields.push_back(field);
    }
    return fields;
}

// (row, x) activation of one field for a given user/item/situation.
template <typename T>
std::pair<std::int64_t, T> field_activation(const FeatureField& field, const Corpus& corpus,
                                            std::int32_t user, std::int32_t item,
                                            const std::vector<T>& situation) {
    auto fetch = [&](const std::vector<std::vector<float>>& table, std::int32_t id,
                     std::size_t col) -> double {
        const auto& row = table[static_cast<std::size_t>(id)];
        return col < row.size() ? static_cast<double>(row[col]) : 0.0;
    };
    double raw = 0.0;
    switch (field.source) {
        case FeatureField::Source::UserId:
            return {user, T(1)};
        case FeatureField::Source::ItemId:
            return {item, T(1)};
        case FeatureField::Source::UserFeature:
            raw = fetch(corpus.user_features, user, field.column);
            break;
        case FeatureField::Source::ItemFeature:
            raw = fetch(corpus.item_features, item, field.column);
            break;
        case FeatureField::Source::SituationFeature:
            raw = field.column < situation.size()
                      ? static_cast<double>(situation[field.column])
                      : 0.0;
            break;
    }
    if (field.categorical) {
        auto row = static_cast<std::int64_t>(raw);
        if (row < 0 || row >= field.rows)
            throw std::runtime_error("categorical index out of range for field " +
                                     field.name);
        return {row, T(1)};
    }
    return {0, static_cast<T>(raw)};
}

}  // namespace detail
}  // namespace recflex
