#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace recflex {

enum class Split : int { Train = 0, Dev = 1, Test = 2 };
inline constexpr std::array<const char*, 3> kSplitNames = {"train", "dev", "test"};

enum class FeatureScope : std::uint8_t { User = 0, Item = 1, Situation = 2 };

struct FeatureDesc {
    std::string name;
    FeatureScope scope = FeatureScope::Situation;
    bool categorical = true;
    // categorical: cardinality counts the reserved "unknown" index 0, so
    // cardinality = 1 + number of distinct train-split values.
    std::int32_t cardinality = 1;
    std::map<std::string, std::int32_t> vocab;  // raw value -> index (>=1)
    // numeric: standardization statistics from the train split.
    double mean = 0.0;
    double stdev = 1.0;
    bool constant = false;  // numeric feature with zero train variance

    bool operator==(const FeatureDesc&) const = default;
};

struct ContextSchema {
    std::vector<FeatureDesc> features;

    std::vector<const FeatureDesc*> by_scope(FeatureScope s) const {
        std::vector<const FeatureDesc*> out;
        for (const auto& f : features)
            if (f.scope == s) out.push_back(&f);
        return out;
    }
    bool operator==(const ContextSchema&) const = default;
};

// One (user, item, time) event. Ids are dense indices.
struct InteractionRecord {
    std::int32_t user_id = 0;
    std::int32_t item_id = 0;
    std::int64_t time = 0;
    std::int8_t label = -1;  // -1 = absent, otherwise 0/1
    std::string impression_id;  // empty = absent
    std::vector<float> situation;  // values aligned to schema situation features
    std::vector<std::string> raw_situation;  // raw strings, aligned to Corpus::situation_columns
    bool has_neg_items = false;
    std::vector<std::int32_t> neg_items;  // evaluation candidates (dense ids)
    std::vector<std::int32_t> history;    // materialized by the sequential reader

    bool has_label() const { return label >= 0; }
    bool operator==(const InteractionRecord&) const = default;
};

struct ImpressionGroup {
    std::string impression_id;
    std::int32_t user_id = 0;
    std::int64_t time = 0;  // time of the first record in the group
    std::vector<std::int32_t> items;
    std::vector<std::int8_t> labels;
    std::vector<std::size_t> record_indices;  // indices into the split's records

    std::int32_t n_positive() const {
        std::int32_t n = 0;
        for (auto l : labels) n += (l == 1);
        return n;
    }
    bool operator==(const ImpressionGroup&) const = default;
};

struct Corpus {
    std::int32_t n_users = 0;
    std::int32_t n_items = 0;
    std::array<std::vector<InteractionRecord>, 3> splits;
    // Per-user (time, item) pairs of positive train interactions, sorted by time.
    std::vector<std::vector<std::pair<std::int64_t, std::int32_t>>> user_history;
    std::array<std::vector<ImpressionGroup>, 3> impressions;
    ContextSchema schema;
    std::vector<std::vector<float>> user_features;  // n_users x |user-scope features|
    std::vector<std::vector<float>> item_features;  // n_items x |item-scope features|
    std::unordered_map<std::int64_t, std::int32_t> user_index;  // raw id -> dense
    std::unordered_map<std::int64_t, std::int32_t> item_index;
    std::vector<std::int64_t> user_raw;  // dense -> raw
    std::vector<std::int64_t> item_raw;
    std::vector<std::string> situation_columns;  // c_* columns found in interaction files
    std::vector<std::int64_t> item_train_count;  // positive train interactions per item

    const std::vector<InteractionRecord>& split(Split s) const {
        return splits[static_cast<int>(s)];
    }
    std::vector<InteractionRecord>& split(Split s) { return splits[static_cast<int>(s)]; }
    const std::vector<ImpressionGroup>& impression_split(Split s) const {
        return impressions[static_cast<int>(s)];
    }
    std::vector<ImpressionGroup>& impression_split(Split s) {
        return impressions[static_cast<int>(s)];
    }

    // The user's train-positive items strictly earlier than `time`, most
    // recent `history_max` of them, oldest first.
    std::vector<std::int32_t> history_before(std::int32_t user, std::int64_t time,
                                             int history_max) const {
        std::vector<std::int32_t> out;
        if (user < 0 || user >= n_users) return out;
        const auto& hist = user_history[user];
        // hist is sorted by time; find the first entry not strictly earlier
        std::size_t end = 0;
        while (end < hist.size() && hist[end].first < time) ++end;
        std::size_t start = (history_max > 0 && end > static_cast<std::size_t>(history_max))
                                ? end - static_cast<std::size_t>(history_max)
                                : 0;
        for (std::size_t i = start; i < end; ++i) out.push_back(hist[i].second);
        return out;
    }

    bool operator==(const Corpus&) const = default;
};

struct MetricReport {
    std::map<std::string, double> entries;  // "HR@5" -> value
    std::int64_t n_lists = 0;        // lists evaluated (ranking modes)
    std::int64_t n_excluded = 0;     // lists skipped for having no positives
    std::int64_t n_interactions = 0; // interactions evaluated (CTR mode)

    double at(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end())
            throw std::out_of_range("metric not in report: " + key);
        return it->second;
    }
    bool operator==(const MetricReport&) const = default;
};

}  // namespace recflex
