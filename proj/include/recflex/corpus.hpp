#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "recflex/tsv.hpp"
#include "recflex/types.hpp"

namespace recflex {

namespace detail {

inline std::int32_t intern(std::unordered_map<std::int64_t, std::int32_t>& index,
                           std::vector<std::int64_t>& raw, std::int64_t raw_id) {
    auto it = index.find(raw_id);
    if (it != index.end()) return it->second;
    auto dense = static_cast<std::int32_t>(raw.size());
    index.emplace(raw_id, dense);
    raw.push_back(raw_id);
    return dense;
}

inline bool is_situation_column(const std::string& name) {
    return name.rfind("c_", 0) == 0;
}

struct SplitColumns {
    int user = -1, item = -1, time = -1, label = -1, impression = -1, neg = -1;
    std::vector<int> situation;  // indices of c_* columns, file order
};

inline SplitColumns resolve_columns(const TsvTable& t, bool need_label,
                                    bool need_impression) {
    SplitColumns c;
    c.user = t.require_column("user_id");
    c.item = t.require_column("item_id");
    c.time = t.require_column("time");
    c.label = t.column_index("label");
    c.impression = t.column_index("impression_id");
    c.neg = t.column_index("neg_items");
    if (need_label && c.label < 0) throw std::runtime_error("missing label column");
    if (need_impression && c.impression < 0)
        throw std::runtime_error("missing impression_id column");
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        if (is_situation_column(t.columns[i])) c.situation.push_back(static_cast<int>(i));
    return c;
}

inline void finalize_histories(Corpus& corpus) {
    corpus.user_history.assign(corpus.n_users, {});
    corpus.item_train_count.assign(corpus.n_items, 0);
    for (const auto& r : corpus.split(Split::Train)) {
        bool positive = !r.has_label() || r.label == 1;
        if (!positive) continue;
        corpus.user_history[r.user_id].emplace_back(r.time, r.item_id);
        corpus.item_train_count[r.item_id] += 1;
    }
    for (auto& h : corpus.user_history)
        std::stable_sort(h.begin(), h.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
}

inline void group_impressions(Corpus& corpus) {
    std::unordered_map<std::string, int> id_to_split;
    for (int s = 0; s < 3; ++s) {
        auto& records = corpus.splits[s];
        auto& groups = corpus.impressions[s];
        std::unordered_map<std::string, std::size_t> group_of;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            if (r.impression_id.empty())
                throw std::runtime_error("record without impression_id in impression mode");
            auto prev = id_to_split.find(r.impression_id);
            if (prev != id_to_split.end() && prev->second != s)
                throw std::runtime_error("impression group spans splits: " + r.impression_id);
            id_to_split[r.impression_id] = s;
            auto it = group_of.find(r.impression_id);
            if (it == group_of.end()) {
                it = group_of.emplace(r.impression_id, groups.size()).first;
                ImpressionGroup g;
                g.impression_id = r.impression_id;
                g.user_id = r.user_id;
                g.time = r.time;
                groups.push_back(std::move(g));
            }
            auto& g = groups[it->second];
            if (g.user_id != r.user_id)
                throw std::runtime_error("impression group spans two users: " +
                                         r.impression_id);
            g.items.push_back(r.item_id);
            g.labels.push_back(r.label);
            g.record_indices.push_back(i);
        }
    }
}

inline Corpus read_splits(const std::string& train_path, const std::string& dev_path,
                          const std::string& test_path, bool impression_mode) {
    Corpus corpus;
    const std::string paths[3] = {train_path, dev_path, test_path};
    for (int s = 0; s < 3; ++s) {
        TsvTable table = read_tsv(paths[s]);
        SplitColumns cols = resolve_columns(table, impression_mode, impression_mode);
        if (s == 0) {
            for (int ci : cols.situation) corpus.situation_columns.push_back(table.columns[ci]);
        } else {
            std::vector<std::string> here;
            for (int ci : cols.situation) here.push_back(table.columns[ci]);
            if (here != corpus.situation_columns)
                throw std::runtime_error("situation columns differ between splits");
        }
        auto& records = corpus.splits[s];
        records.reserve(table.rows.size());
        for (const auto& row : table.rows) {
            InteractionRecord r;
            r.user_id = intern(corpus.user_index, corpus.user_raw,
                               parse_int(row[cols.user], "user_id"));
            r.item_id = intern(corpus.item_index, corpus.item_raw,
                               parse_int(row[cols.item], "item_id"));
            r.time = parse_int(row[cols.time], "time");
            if (cols.label >= 0 && !row[cols.label].empty()) {
                std::int64_t l = parse_int(row[cols.label], "label");
                if (l != 0 && l != 1)
                    throw std::runtime_error("label must be 0 or 1, got " +
                                             std::to_string(l));
                r.label = static_cast<std::int8_t>(l);
            } else if (impression_mode) {
                throw std::runtime_error("missing label in impression mode");
            }
            if (cols.impression >= 0 && !row[cols.impression].empty())
                r.impression_id = row[cols.impression];
            if (cols.neg >= 0 && !row[cols.neg].empty()) {
                r.has_neg_items = true;
                std::unordered_set<std::int32_t> seen;
                for (std::int64_t raw_neg : parse_int_list(row[cols.neg])) {
                    std::int32_t dense =
                        intern(corpus.item_index, corpus.item_raw, raw_neg);
                    if (dense == r.item_id)
                        throw std::runtime_error("neg_items contains positive item " +
                                                 std::to_string(raw_neg));
                    if (!seen.insert(dense).second)
                        throw std::runtime_error("neg_items contains duplicate item " +
                                                 std::to_string(raw_neg));
                    r.neg_items.push_back(dense);
                }
            }
            for (int ci : cols.situation) r.raw_situation.push_back(row[ci]);
            records.push_back(std::move(r));
        }
    }
    if (corpus.split(Split::Train).empty()) throw std::runtime_error("empty train split");
    corpus.n_users = static_cast<std::int32_t>(corpus.user_raw.size());
    corpus.n_items = static_cast<std::int32_t>(corpus.item_raw.size());
    finalize_histories(corpus);
    if (impression_mode) group_impressions(corpus);
    return corpus;
}

}  // namespace detail

inline Corpus read_base(const std::string& train_path, const std::string& dev_path,
                        const std::string& test_path) {
    return detail::read_splits(train_path, dev_path, test_path, false);
}

inline Corpus read_sequential(const std::string& train_path, const std::string& dev_path,
                              const std::string& test_path, int history_max) {
    if (history_max < 1) throw std::runtime_error("history_max must be >= 1");
    Corpus corpus = read_base(train_path, dev_path, test_path);
    for (Split s : {Split::Dev, Split::Test})
        for (auto& r : corpus.split(s))
            r.history = corpus.history_before(r.user_id, r.time, history_max);
    return corpus;
}

inline Corpus read_impressions(const std::string& train_path, const std::string& dev_path,
                               const std::string& test_path) {
    return detail::read_splits(train_path, dev_path, test_path, true);
}

namespace detail {

enum class ColumnKind { Categorical, Numeric };

inline ColumnKind column_kind(const std::string& name) {
    if (name.size() > 2 && name.compare(name.size() - 2, 2, "_c") == 0)
        return ColumnKind::Categorical;
    if (name.size() > 2 && name.compare(name.size() - 2, 2, "_f") == 0)
        return ColumnKind::Numeric;
    throw std::runtime_error("feature column must end in _c or _f: " + name);
}

// Builds one FeatureDesc from the train-split raw values of the column.
inline FeatureDesc build_feature(const std::string& name, FeatureScope scope,
                                 const std::vector<std::string>& train_values) {
    FeatureDesc f;
    f.name = name;
    f.scope = scope;
    f.categorical = column_kind(name) == ColumnKind::Categorical;
    if (f.categorical) {
        std::set<std::string> distinct(train_values.begin(), train_values.end());
        std::int32_t next = 1;  // 0 is reserved for unknown
        for (const auto& v : distinct) f.vocab.emplace(v, next++);
        f.cardinality = next;
    } else {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& v : train_values) {
            double x = parse_double(v, name);
            sum += x;
            sumsq += x * x;
        }
        std::size_t n = train_values.size();
        f.mean = n ? sum / static_cast<double>(n) : 0.0;
        double var = n ? sumsq / static_cast<double>(n) - f.mean * f.mean : 0.0;
        f.stdev = var > 0 ? std::sqrt(var) : 0.0;
        f.constant = f.stdev < 1e-12;
        if (f.constant) f.stdev = 1.0;
    }
    return f;
}

inline float encode_feature(const FeatureDesc& f, const std::string& raw) {
    if (f.categorical) {
        auto it = f.vocab.find(raw);
        return it == f.vocab.end() ? 0.0f : static_cast<float>(it->second);
    }
    if (f.constant) return 0.0f;
    return static_cast<float>((parse_double(raw, f.name) - f.mean) / f.stdev);
}

// Loads a metadata table keyed by its first column (raw id). Rows whose id is
// not in the corpus are warned about and dropped.
inline std::unordered_map<std::int32_t, std::vector<std::string>> load_meta(
    const std::string& path, const std::string& key_column,
    const std::unordered_map<std::int64_t, std::int32_t>& index,
    std::vector<std::string>& columns_out) {
    std::unordered_map<std::int32_t, std::vector<std::string>> out;
    TsvTable table = read_tsv(path);
    int key = table.require_column(key_column);
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        if (static_cast<int>(i) != key) columns_out.push_back(table.columns[i]);
    for (const auto& row : table.rows) {
        std::int64_t raw = parse_int(row[key], key_column);
        auto it = index.find(raw);
        if (it == index.end()) {
            std::cerr << "warning: metadata row for unknown " << key_column << " "
                      << raw << " dropped\n";
            continue;
        }
        std::vector<std::string> values;
        for (std::size_t i = 0; i < row.size(); ++i)
            if (static_cast<int>(i) != key) values.push_back(row[i]);
        out[it->second] = std::move(values);
    }
    return out;
}

}  // namespace detail

// Attaches user/item metadata and situation context to an already-read corpus.
// Empty meta paths skip that table; empty situation_columns means "all c_*
// columns present in the interaction files".
inline Corpus read_context(Corpus corpus, const std::string& user_meta_path,
                           const std::string& item_meta_path,
                           std::vector<std::string> situation_columns = {}) {
    corpus.schema.features.clear();

    // ids observed in the train split (feature statistics use these only)
    std::vector<char> user_in_train(corpus.n_users, 0), item_in_train(corpus.n_items, 0);
    for (const auto& r : corpus.split(Split::Train)) {
        user_in_train[r.user_id] = 1;
        item_in_train[r.item_id] = 1;
    }

    auto attach_meta = [&](const std::string& path, const std::string& key_column,
                           FeatureScope scope,
                           const std::unordered_map<std::int64_t, std::int32_t>& index,
                           const std::vector<char>& in_train, std::int32_t n_ids,
                           std::vector<std::vector<float>>& table_out) {
        table_out.assign(n_ids, {});
        if (path.empty()) return;
        std::vector<std::string> columns;
        auto meta = detail::load_meta(path, key_column, index, columns);
        std::vector<FeatureDesc*> descs;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::vector<std::string> train_values;
            for (std::int32_t id = 0; id < n_ids; ++id) {
                if (!in_train[id]) continue;
                auto it = meta.find(id);
                if (it != meta.end()) train_values.push_back(it->second[c]);
            }
            corpus.schema.features.push_back(
                detail::build_feature(columns[c], scope, train_values));
        }
        std::size_t base = corpus.schema.features.size() - columns.size();
        for (std::int32_t id = 0; id < n_ids; ++id) {
            auto it = meta.find(id);
            table_out[id].resize(columns.size());
            for (std::size_t c = 0; c < columns.size(); ++c) {
                const auto& f = corpus.schema.features[base + c];
                // id with no metadata row: categorical unknown, numeric train mean
                table_out[id][c] =
                    it == meta.end() ? 0.0f : detail::encode_feature(f, it->second[c]);
            }
        }
    };

    attach_meta(user_meta_path, "user_id", FeatureScope::User, corpus.user_index,
                user_in_train, corpus.n_users, corpus.user_features);
    attach_meta(item_meta_path, "item_id", FeatureScope::Item, corpus.item_index,
                item_in_train, corpus.n_items, corpus.item_features);

    if (situation_columns.empty()) situation_columns = corpus.situation_columns;
    std::vector<std::size_t> col_pos;
    for (const auto& name : situation_columns) {
        auto it = std::find(corpus.situation_columns.begin(),
                            corpus.situation_columns.end(), name);
        if (it == corpus.situation_columns.end())
            throw std::runtime_error("situation column not in interaction files: " + name);
        col_pos.push_back(
            static_cast<std::size_t>(it - corpus.situation_columns.begin()));
    }
    std::size_t situation_base = corpus.schema.features.size();
    for (std::size_t c = 0; c < situation_columns.size(); ++c) {
        std::vector<std::string> train_values;
        for (const auto& r : corpus.split(Split::Train))
            train_values.push_back(r.raw_situation[col_pos[c]]);
        corpus.schema.features.push_back(detail::build_feature(
            situation_columns[c], FeatureScope::Situation, train_values));
    }
    for (auto& split : corpus.splits) {
        for (auto& r : split) {
            r.situation.resize(situation_columns.size());
            for (std::size_t c = 0; c < situation_columns.size(); ++c)
                r.situation[c] = detail::encode_feature(
                    corpus.schema.features[situation_base + c], r.raw_situation[col_pos[c]]);
        }
    }
    return corpus;
}

}  // namespace recflex
