#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "recflex/tsv.hpp"

namespace recflex {

struct RawEvent {
    std::int64_t user = 0;
    std::int64_t item = 0;
    std::int64_t time = 0;
    bool positive = true;
};

struct PrepConfig {
    int k_core = 5;
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
    int session_len = 20;
    double pos_threshold = 4.0;
    std::vector<std::string> situations = {"hour", "weekday", "period"};
};

inline int hour_of_day(std::int64_t epoch_seconds) {
    std::int64_t sec = ((epoch_seconds % 86400) + 86400) % 86400;
    return static_cast<int>(sec / 3600);
}

// Monday = 0. 1970-01-01 was a Thursday.
inline int day_of_week(std::int64_t epoch_seconds) {
    std::int64_t days = epoch_seconds / 86400;
    if (epoch_seconds % 86400 < 0) --days;
    return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

// Buckets: [0,6) night=0, [6,12) morning=1, [12,18) afternoon=2, [18,24) evening=3.
inline int period_of_day(std::int64_t epoch_seconds) {
    return hour_of_day(epoch_seconds) / 6;
}

// Iterative k-core on positive interactions: repeatedly drop users/items with
// fewer than k positives until a fixpoint. Dropping a user/item removes all
// of its events, including negatives.
inline std::vector<RawEvent> k_core_filter(std::vector<RawEvent> events, int k) {
    if (k <= 1) return events;
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<std::int64_t, int> user_pos, item_pos;
        for (const auto& e : events) {
            if (!e.positive) continue;
            ++user_pos[e.user];
            ++item_pos[e.item];
        }
        std::vector<RawEvent> kept;
        kept.reserve(events.size());
        for (const auto& e : events) {
            if (user_pos[e.user] >= k && item_pos[e.item] >= k)
                kept.push_back(e);
            else
                changed = true;
        }
        events = std::move(kept);
    }
    return events;
}

// Chronological split by global time quantiles; records with a timestamp equal
// to the last record of a split stay in that (earlier) split.
inline std::array<std::vector<RawEvent>, 3> temporal_split(
    std::vector<RawEvent> events, const std::array<double, 3>& ratios) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    for (double r : ratios)
        if (r < 0) throw std::runtime_error("split ratios must be non-negative");
    if (ratios[0] <= 0 || std::abs(sum - 1.0) > 1e-9)
        throw std::runtime_error("split ratios must be positive and sum to 1");
    std::stable_sort(events.begin(), events.end(),
                     [](const RawEvent& a, const RawEvent& b) { return a.time < b.time; });
    std::size_t n = events.size();
    std::size_t c1 = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    std::size_t c2 = static_cast<std::size_t>(
        std::llround((ratios[0] + ratios[1]) * static_cast<double>(n)));
    c1 = std::min(c1, n);
    c2 = std::min(std::max(c2, c1), n);
    while (c1 > 0 && c1 < n && events[c1].time == events[c1 - 1].time) ++c1;
    c2 = std::max(c2, c1);
    while (c2 > 0 && c2 < n && events[c2].time == events[c2 - 1].time) ++c2;
    std::array<std::vector<RawEvent>, 3> out;
    out[0].assign(events.begin(), events.begin() + static_cast<std::ptrdiff_t>(c1));
    out[1].assign(events.begin() + static_cast<std::ptrdiff_t>(c1),
                  events.begin() + static_cast<std::ptrdiff_t>(c2));
    out[2].assign(events.begin() + static_cast<std::ptrdiff_t>(c2), events.end());
    return out;
}

namespace detail {

struct PrepRow {
    RawEvent event;
    std::string impression_id;
};

// Sessions are chunked within each split so no impression spans splits.
inline std::vector<PrepRow> chunk_sessions(const std::vector<RawEvent>& split_events,
                                           int session_len, const std::string& tag) {
    std::unordered_map<std::int64_t, std::vector<RawEvent>> by_user;
    std::vector<std::int64_t> user_order;
    for (const auto& e : split_events) {
        auto [it, inserted] = by_user.try_emplace(e.user);
        if (inserted) user_order.push_back(e.user);
        it->second.push_back(e);
    }
    std::vector<PrepRow> rows;
    rows.reserve(split_events.size());
    for (auto user : user_order) {
        auto& events = by_user[user];
        std::stable_sort(events.begin(), events.end(),
                         [](const RawEvent& a, const RawEvent& b) { return a.time < b.time; });
        for (std::size_t i = 0; i < events.size(); ++i) {
            std::size_t session = i / static_cast<std::size_t>(session_len);
            rows.push_back({events[i], tag + "_u" + std::to_string(user) + "_s" +
                                           std::to_string(session)});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const PrepRow& a, const PrepRow& b) {
        return a.event.time < b.event.time;
    });
    return rows;
}

}  // namespace detail

inline std::vector<RawEvent> read_raw_interactions(const std::string& path,
                                                   double pos_threshold) {
    TsvTable table = read_tsv(path);
    int user = table.require_column("user_id");
    int item = table.require_column("item_id");
    int time = table.require_column("time");
    int rating = table.column_index("rating");
    std::vector<RawEvent> events;
    events.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        RawEvent e;
        e.user = parse_int(row[user], "user_id");
        e.item = parse_int(row[item], "item_id");
        e.time = parse_int(row[time], "time");
        e.positive = rating < 0 || parse_double(row[rating], "rating") >= pos_threshold;
        events.push_back(e);
    }
    return events;
}

// Full preprocessing pipeline: k-core, positive labeling, temporal split,
// per-user session impressions, timestamp-derived situation context. Writes
// train.tsv / dev.tsv / test.tsv into out_dir.
inline void prep_dataset(const std::string& raw_path, const std::string& out_dir,
                         const PrepConfig& config) {
    if (config.session_len < 1) throw std::runtime_error("session_len must be >= 1");
    auto events = read_raw_interactions(raw_path, config.pos_threshold);
    events = k_core_filter(events, config.k_core);
    if (events.empty()) throw std::runtime_error("k-core filtering emptied the dataset");
    auto splits = temporal_split(std::move(events), config.split_ratios);

    std::filesystem::create_directories(out_dir);
    static const char* tags[3] = {"tr", "de", "te"};
    static const char* names[3] = {"train.tsv", "dev.tsv", "test.tsv"};
    for (int s = 0; s < 3; ++s) {
        auto rows = detail::chunk_sessions(splits[s], config.session_len, tags[s]);
        std::string path = (std::filesystem::path(out_dir) / names[s]).string();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << "user_id\titem_id\ttime\tlabel\timpression_id";
        for (const auto& sit : config.situations) out << "\tc_" << sit << "_c";
        out << "\n";
        for (const auto& row : rows) {
            const auto& e = row.event;
            out << e.user << '\t' << e.item << '\t' << e.time << '\t'
                << (e.positive ? 1 : 0) << '\t' << row.impression_id;
            for (const auto& sit : config.situations) {
                int v;
                if (sit == "hour")
                    v = hour_of_day(e.time);
                else if (sit == "weekday")
                    v = day_of_week(e.time);
                else if (sit == "period")
                    v = period_of_day(e.time);
                else
                    throw std::runtime_error("unknown situation feature: " + sit);
                out << '\t' << v;
            }
            out << "\n";
        }
        if (!out) throw std::runtime_error("write failure: " + path);
    }
}

}  // namespace recflex
