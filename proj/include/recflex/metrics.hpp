#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "recflex/losses.hpp"
#include "recflex/types.hpp"

namespace recflex {

struct RankedList {
    std::vector<std::int32_t> ids;        // candidate ids by descending score
    std::vector<std::int8_t> relevance;   // parallel binary relevance

    std::size_t size() const { return ids.size(); }
    int n_positive() const {
        int n = 0;
        for (auto r : relevance) n += (r == 1);
        return n;
    }
};

// Stable descending sort with ascending-id tiebreak. NaN scores are an error.
inline RankedList rank(const std::vector<double>& scores,
                       const std::vector<std::int32_t>& ids,
                       const std::vector<std::int8_t>& relevance) {
    if (scores.size() != ids.size() || scores.size() != relevance.size())
        throw std::invalid_argument("rank: length mismatch");
    for (double s : scores)
        if (std::isnan(s)) throw std::runtime_error("rank: NaN score");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    RankedList out;
    out.ids.reserve(order.size());
    out.relevance.reserve(order.size());
    for (auto i : order) {
        out.ids.push_back(ids[i]);
        out.relevance.push_back(relevance[i]);
    }
    return out;
}

inline double hr_at_k(const RankedList& list, int k) {
    std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    for (std::size_t i = 0; i < top; ++i)
        if (list.relevance[i] == 1) return 1.0;
    return 0.0;
}

inline double recall_at_k(const RankedList& list, int k) {
    int n_pos = list.n_positive();
    if (n_pos == 0) return 0.0;
    std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    int hits = 0;
    for (std::size_t i = 0; i < top; ++i) hits += (list.relevance[i] == 1);
    return static_cast<double>(hits) / static_cast<double>(n_pos);
}

inline double ndcg_at_k(const RankedList& list, int k) {
    int n_pos = list.n_positive();
    if (n_pos == 0)
        throw std::runtime_error("ndcg_at_k: list without positives");
    std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    double dcg = 0.0;
    for (std::size_t i = 0; i < top; ++i)
        if (list.relevance[i] == 1) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    std::size_t ideal = std::min<std::size_t>(top, static_cast<std::size_t>(n_pos));
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

inline double map_at_k(const RankedList& list, int k) {
    int n_pos = list.n_positive();
    if (n_pos == 0)
        throw std::runtime_error("map_at_k: list without positives");
    std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    double ap = 0.0;
    int hits = 0;
    for (std::size_t i = 0; i < top; ++i) {
        if (list.relevance[i] == 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return ap / static_cast<double>(std::min(k, n_pos));
}

// Global AUC via rank statistics with tie midranks; O(n log n).
inline double auc(const std::vector<double>& predictions,
                  const std::vector<std::int8_t>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("auc: bad input lengths");
    std::size_t n = predictions.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return predictions[a] < predictions[b];
    });
    std::vector<double> midrank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && predictions[order[j + 1]] == predictions[order[i]]) ++j;
        double mr = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) midrank[order[k]] = mr;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    std::int64_t n_pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            pos_rank_sum += midrank[k];
            ++n_pos;
        }
    }
    std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::runtime_error("auc undefined: single-class labels");
    double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

inline double log_loss(const std::vector<double>& predictions,
                       const std::vector<std::int8_t>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("log_loss: bad input lengths");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        total += bce(predictions[i], labels[i]).loss;
    return total / static_cast<double>(predictions.size());
}

// Per-list ranking metrics averaged over lists with at least one positive.
// Tie-break ids inside a ScoredList are its positions.
inline MetricReport evaluate_lists(const std::vector<ScoredList>& groups,
                                   const std::vector<int>& ks) {
    MetricReport report;
    std::map<std::string, double> sums;
    for (const auto& g : groups) {
        if (g.n_positive() == 0) {
            ++report.n_excluded;
            continue;
        }
        std::vector<std::int32_t> ids(g.size());
        std::iota(ids.begin(), ids.end(), 0);
        RankedList ranked = rank(g.scores, ids, g.labels);
        for (int k : ks) {
            sums["HR@" + std::to_string(k)] += hr_at_k(ranked, k);
            sums["NDCG@" + std::to_string(k)] += ndcg_at_k(ranked, k);
            sums["MAP@" + std::to_string(k)] += map_at_k(ranked, k);
            sums["Recall@" + std::to_string(k)] += recall_at_k(ranked, k);
        }
        ++report.n_lists;
    }
    if (report.n_lists > 0)
        for (const auto& [key, sum] : sums)
            report.entries[key] = sum / static_cast<double>(report.n_lists);
    return report;
}

// Lower-is-better metrics (everything else improves by increasing).
inline bool metric_higher_is_better(const std::string& name) {
    return name.rfind("LogLoss", 0) != 0;
}

}  // namespace recflex
