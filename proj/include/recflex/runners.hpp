#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "recflex/cache.hpp"
#include "recflex/checkpoint.hpp"
#include "recflex/config.hpp"
#include "recflex/corpus.hpp"
#include "recflex/losses.hpp"
#include "recflex/metrics.hpp"
#include "recflex/models/factory.hpp"
#include "recflex/optim.hpp"

namespace recflex {

// n items drawn uniformly without replacement from the items the user never
// interacted with positively in train; exclude_item additionally bars the
// current evaluation target.
inline std::vector<std::int32_t> sample_negatives(Rng& rng, std::int32_t user, int n,
                                                  const Corpus& corpus,
                                                  std::int32_t exclude_item = -1) {
    std::unordered_set<std::int32_t> blocked;
    for (const auto& [t, item] : corpus.user_history[user]) blocked.insert(item);
    if (exclude_item >= 0) blocked.insert(exclude_item);
    auto eligible =
        static_cast<std::int64_t>(corpus.n_items) - static_cast<std::int64_t>(blocked.size());
    if (eligible < n)
        throw std::runtime_error("cannot sample " + std::to_string(n) +
                                 " negatives: only " + std::to_string(eligible) +
                                 " eligible items");
    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(n));
    if (eligible <= 2 * static_cast<std::int64_t>(n)) {
        // few eligible items: enumerate and partially shuffle
        std::vector<std::int32_t> pool;
        for (std::int32_t i = 0; i < corpus.n_items; ++i)
            if (!blocked.count(i)) pool.push_back(i);
        for (int k = 0; k < n; ++k) {
            auto j = static_cast<std::size_t>(
                rng.uniform_below(static_cast<std::uint64_t>(pool.size() - k)));
            std::swap(pool[k + j], pool[static_cast<std::size_t>(k)]);
            out.push_back(pool[static_cast<std::size_t>(k)]);
        }
    } else {
        std::unordered_set<std::int32_t> drawn;
        while (static_cast<int>(out.size()) < n) {
            auto item = static_cast<std::int32_t>(
                rng.uniform_below(static_cast<std::uint64_t>(corpus.n_items)));
            if (blocked.count(item) || !drawn.insert(item).second) continue;
            out.push_back(item);
        }
    }
    return out;
}

namespace detail {

template <typename T>
std::vector<T> to_scalar(const std::vector<float>& v) {
    return std::vector<T>(v.begin(), v.end());
}

inline ScoreRequest<float> make_request(const Corpus& corpus, std::int32_t user,
                                        std::vector<std::int32_t> candidates,
                                        std::int64_t time, const std::vector<float>& situation,
                                        int history_max) {
    ScoreRequest<float> req;
    req.user_id = user;
    req.candidates = std::move(candidates);
    req.history = corpus.history_before(user, time, history_max);
    req.situation = situation;
    return req;
}

// Computes frozen-backbone scores and candidate item embeddings for one list.
struct BackboneOutput {
    std::vector<float> scores;
    Matrix<float> embeddings;
};

inline BackboneOutput run_backbone(const Scorer<float>& backbone,
                                   const ScoreRequest<float>& req) {
    BackboneOutput out;
    out.scores = backbone.forward(req);
    const Tensor<float>* table = backbone.item_embedding_table();
    if (!table)
        throw std::runtime_error("backbone model " + backbone.name() +
                                 " exposes no item embeddings");
    const auto dim = table->row_size();
    out.embeddings = Matrix<float>(static_cast<std::int64_t>(req.candidates.size()), dim);
    for (std::size_t i = 0; i < req.candidates.size(); ++i) {
        const float* src = table->row(req.candidates[i]);
        std::copy(src, src + dim, out.embeddings.row(static_cast<std::int64_t>(i)));
    }
    return out;
}

inline ListLossResult impression_loss(const std::string& loss_name, const ScoredList& list) {
    if (loss_name == "list_bpr") return list_bpr(list);
    if (loss_name == "listnet") return listnet(list);
    if (loss_name == "softmax_ce") return softmax_ce(list);
    throw std::runtime_error("unknown loss_name: " + loss_name);
}

}  // namespace detail

inline MetricReport evaluate_topk(const Scorer<float>& scorer, const Corpus& corpus,
                                  Split split, const RunConfig& config) {
    MetricReport report;
    std::map<std::string, double> sums;
    for (const auto& r : corpus.split(split)) {
        std::vector<std::int32_t> candidates{r.item_id};
        if (r.has_neg_items) {
            candidates.insert(candidates.end(), r.neg_items.begin(), r.neg_items.end());
        } else {
            Rng neg_rng(derive_seed(config.random_seed,
                                    static_cast<std::uint64_t>(r.user_id),
                                    static_cast<std::uint64_t>(r.item_id)));
            auto negs = sample_negatives(neg_rng, r.user_id, config.test_num_neg, corpus,
                                         r.item_id);
            candidates.insert(candidates.end(), negs.begin(), negs.end());
        }
        auto req = detail::make_request(corpus, r.user_id, std::move(candidates), r.time,
                                        r.situation, config.history_max);
        auto scores = scorer.forward(req);
        std::vector<std::int8_t> relevance(req.candidates.size(), 0);
        relevance[0] = 1;
        RankedList ranked = rank(detail::to_scalar<double>(scores), req.candidates, relevance);
        for (int k : config.topk) {
            sums["HR@" + std::to_string(k)] += hr_at_k(ranked, k);
            sums["NDCG@" + std::to_string(k)] += ndcg_at_k(ranked, k);
        }
        ++report.n_lists;
    }
    if (report.n_lists == 0) throw std::runtime_error("no interactions to evaluate");
    for (const auto& [key, sum] : sums)
        report.entries[key] = sum / static_cast<double>(report.n_lists);
    return report;
}

inline MetricReport evaluate_ctr(const Scorer<float>& scorer, const Corpus& corpus,
                                 Split split, const RunConfig& config) {
    MetricReport report;
    std::vector<double> preds;
    std::vector<std::int8_t> labels;
    for (const auto& r : corpus.split(split)) {
        if (!r.has_label())
            throw std::runtime_error("CTR evaluation requires labels on every record");
        auto req = detail::make_request(corpus, r.user_id, {r.item_id}, r.time, r.situation,
                                        config.history_max);
        preds.push_back(sigmoid(static_cast<double>(scorer.forward(req)[0])));
        labels.push_back(r.label);
    }
    report.n_interactions = static_cast<std::int64_t>(preds.size());
    report.entries["AUC"] = auc(preds, labels);
    report.entries["LogLoss"] = log_loss(preds, labels);
    return report;
}

inline MetricReport evaluate_impressions(const Scorer<float>& scorer, const Corpus& corpus,
                                         Split split, const RunConfig& config,
                                         const Scorer<float>* backbone = nullptr) {
    MetricReport report;
    std::map<std::string, double> sums;
    for (const auto& g : corpus.impression_split(split)) {
        if (g.n_positive() == 0) {
            ++report.n_excluded;
            continue;
        }
        const auto& first = corpus.split(split)[g.record_indices.front()];
        auto req = detail::make_request(corpus, g.user_id, g.items, g.time, first.situation,
                                        config.history_max);
        detail::BackboneOutput base;
        if (scorer.is_reranker()) {
            if (!backbone) throw std::runtime_error("re-ranker evaluation needs a backbone");
            base = detail::run_backbone(*backbone, req);
            req.base_scores = &base.scores;
            req.base_embeddings = &base.embeddings;
        }
        auto scores = scorer.forward(req);
        RankedList ranked = rank(detail::to_scalar<double>(scores), g.items, g.labels);
        for (int k : config.topk) {
            sums["HR@" + std::to_string(k)] += hr_at_k(ranked, k);
            sums["NDCG@" + std::to_string(k)] += ndcg_at_k(ranked, k);
            sums["MAP@" + std::to_string(k)] += map_at_k(ranked, k);
            sums["Recall@" + std::to_string(k)] += recall_at_k(ranked, k);
        }
        ++report.n_lists;
    }
    if (report.n_lists == 0) throw std::runtime_error("no impression lists to evaluate");
    for (const auto& [key, sum] : sums)
        report.entries[key] = sum / static_cast<double>(report.n_lists);
    return report;
}

inline MetricReport evaluate(const Scorer<float>& scorer, const Corpus& corpus, Split split,
                             const RunConfig& config, const Scorer<float>* backbone = nullptr) {
    switch (config.model_mode) {
        case TaskMode::TopK: return evaluate_topk(scorer, corpus, split, config);
        case TaskMode::CTR: return evaluate_ctr(scorer, corpus, split, config);
        case TaskMode::Impression:
            return evaluate_impressions(scorer, corpus, split, config, backbone);
    }
    throw std::logic_error("unreachable");
}

struct TrainOptions {
    // test hook: replaces dev evaluation when set
    std::function<MetricReport(int epoch)> eval_override;
    std::ostream* log = nullptr;
};

struct TrainResult {
    int best_epoch = 0;
    double best_metric = 0.0;
    int epochs_run = 0;
    std::vector<double> train_losses;       // per epoch mean unit loss
    std::vector<MetricReport> dev_history;  // per epoch dev reports
};

// Mini-batch training with early stopping on the dev main metric (strict
// improvement; ties do not reset patience). Restores the best parameters.
inline TrainResult train(Scorer<float>& scorer, const Corpus& corpus,
                         const RunConfig& config, const Scorer<float>* backbone = nullptr,
                         const TrainOptions& opts = {}) {
    config.validate();
    ParamSet<float>* params = scorer.params();
    if (!params) throw std::runtime_error("model " + scorer.name() + " is not trainable");
    if (config.model_mode == TaskMode::Impression &&
        corpus.impression_split(Split::Train).empty())
        throw std::runtime_error("Impression mode requires impression groups in train");

    Optimizer<float> opt(optimizer_kind_from_string(config.optimizer), config.lr, config.l2);
    opt.full_l2 = config.full_l2;
    opt.attach(*params);
    Rng rng(config.random_seed);

    std::size_t n_units = config.model_mode == TaskMode::Impression
                              ? corpus.impression_split(Split::Train).size()
                              : corpus.split(Split::Train).size();
    std::vector<std::size_t> units(n_units);
    std::iota(units.begin(), units.end(), 0);

    const std::string main_metric = config.resolved_main_metric();
    const bool higher_better = metric_higher_is_better(main_metric);
    TrainResult result;
    std::vector<float> best_snapshot = params->snapshot();
    int since_improve = 0;
    const int stop_at = std::max(config.patience, 1);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(units);
        double epoch_loss = 0.0;
        std::size_t n_counted = 0;
        for (std::size_t start = 0; start < units.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t stop =
                std::min(units.size(), start + static_cast<std::size_t>(config.batch_size));
            double inv_batch = 1.0 / static_cast<double>(stop - start);
            bool any_grad = false;
            for (std::size_t ui = start; ui < stop; ++ui) {
                std::optional<double> unit_loss;
                if (config.model_mode == TaskMode::TopK) {
                    const auto& r = corpus.split(Split::Train)[units[ui]];
                    auto negs = sample_negatives(rng, r.user_id, config.num_neg, corpus);
                    std::vector<std::int32_t> candidates{r.item_id};
                    candidates.insert(candidates.end(), negs.begin(), negs.end());
                    auto req = detail::make_request(corpus, r.user_id, std::move(candidates),
                                                    r.time, r.situation, config.history_max);
                    auto scores = scorer.forward(req);
                    std::vector<float> d_scores(scores.size(), 0.0f);
                    double loss = 0.0;
                    double inv_neg = 1.0 / static_cast<double>(config.num_neg);
                    for (std::size_t j = 1; j < scores.size(); ++j) {
                        auto pr = bpr_pair(scores[0], scores[j]);
                        loss += pr.loss * inv_neg;
                        d_scores[0] += static_cast<float>(pr.d_pos * inv_neg * inv_batch);
                        d_scores[j] += static_cast<float>(pr.d_neg * inv_neg * inv_batch);
                    }
                    scorer.backward(req, d_scores);
                    unit_loss = loss;
                } else if (config.model_mode == TaskMode::CTR) {
                    const auto& r = corpus.split(Split::Train)[units[ui]];
                    if (!r.has_label())
                        throw std::runtime_error("CTR training requires labels");
                    auto req = detail::make_request(corpus, r.user_id, {r.item_id}, r.time,
                                                    r.situation, config.history_max);
                    double s = scorer.forward(req)[0];
                    double p = sigmoid(s);
                    auto b = bce(p, r.label);
                    // d loss / d score through the sigmoid
                    double d_score = b.d_p * p * (1.0 - p);
                    scorer.backward(req, {static_cast<float>(d_score * inv_batch)});
                    unit_loss = b.loss;
                } else {
                    const auto& g = corpus.impression_split(Split::Train)[units[ui]];
                    const auto& first = corpus.split(Split::Train)[g.record_indices.front()];
                    auto req = detail::make_request(corpus, g.user_id, g.items, g.time,
                                                    first.situation, config.history_max);
                    detail::BackboneOutput base;
                    if (scorer.is_reranker()) {
                        if (!backbone)
                            throw std::runtime_error("re-ranker training needs a backbone");
                        base = detail::run_backbone(*backbone, req);
                        req.base_scores = &base.scores;
                        req.base_embeddings = &base.embeddings;
                    }
                    auto scores = scorer.forward(req);
                    ScoredList list;
                    list.scores.assign(scores.begin(), scores.end());
                    list.labels.assign(g.labels.begin(), g.labels.end());
                    auto res = detail::impression_loss(config.loss_name, list);
                    if (!res.skipped) {
                        std::vector<float> d_scores(res.grad.size());
                        for (std::size_t j = 0; j < res.grad.size(); ++j)
                            d_scores[j] = static_cast<float>(res.grad[j] * inv_batch);
                        scorer.backward(req, d_scores);
                        unit_loss = res.loss;
                    }
                }
                if (unit_loss) {
                    if (!std::isfinite(*unit_loss))
                        throw std::runtime_error(
                            "non-finite training loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(start / config.batch_size));
                    epoch_loss += *unit_loss;
                    ++n_counted;
                    any_grad = true;
                }
            }
            if (any_grad) opt.step(*params);
        }
        epoch_loss = n_counted ? epoch_loss / static_cast<double>(n_counted) : 0.0;
        result.train_losses.push_back(epoch_loss);
        result.epochs_run = epoch;

        MetricReport dev = opts.eval_override
                               ? opts.eval_override(epoch)
                               : evaluate(scorer, corpus, Split::Dev, config, backbone);
        result.dev_history.push_back(dev);
        double metric = dev.at(main_metric);
        bool improved = epoch == 1 || (higher_better ? metric > result.best_metric
                                                     : metric < result.best_metric);
        if (improved) {
            result.best_metric = metric;
            result.best_epoch = epoch;
            best_snapshot = params->snapshot();
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (opts.log) {
            std::ostringstream line;
            line << "epoch " << epoch << " loss=" << epoch_loss << " dev:" << main_metric
                 << "=" << metric;
            if (improved) line << " [*best]";
            (*opts.log) << line.str() << "\n";
        }
        if (since_improve >= stop_at) break;
    }
    params->restore(best_snapshot);
    return result;
}

// ---------------------------------------------------------------------------
// Corpus loading with the reader selected by task mode and model family.

inline Corpus load_corpus(const RunConfig& config) {
    const bool impression = config.model_mode == TaskMode::Impression;
    const bool sequential = model_is_sequential(config.model_name);
    const bool context = config.include_user_features || config.include_item_features ||
                         config.include_situation_features;
    std::string reader = impression ? "impression" : (sequential ? "sequential" : "base");

    std::vector<std::string> sources = {config.train_path, config.dev_path,
                                        config.test_path};
    std::ostringstream cfg;
    cfg << "reader=" << reader << ";history_max=" << config.history_max << ";context="
        << context;
    if (context) {
        if (config.include_user_features && !config.user_meta_path.empty()) {
            sources.push_back(config.user_meta_path);
            cfg << ";user_meta=" << config.user_meta_path;
        }
        if (config.include_item_features && !config.item_meta_path.empty()) {
            sources.push_back(config.item_meta_path);
            cfg << ";item_meta=" << config.item_meta_path;
        }
        cfg << ";situations=" << config.include_situation_features;
    }

    std::string cache_path = config.train_path + ".corpus.cache";
    Digest fp{};
    if (config.use_cache) {
        fp = fingerprint_sources(sources, cfg.str());
        if (std::filesystem::exists(cache_path)) {
            try {
                return load_cache(cache_path, fp);
            } catch (const CacheMismatch&) {
                // stale; rebuild below
            }
        }
    }

    Corpus corpus;
    if (impression)
        corpus = read_impressions(config.train_path, config.dev_path, config.test_path);
    else if (sequential)
        corpus = read_sequential(config.train_path, config.dev_path, config.test_path,
                                 config.history_max);
    else
        corpus = read_base(config.train_path, config.dev_path, config.test_path);
    if (context) {
        corpus = read_context(
            std::move(corpus),
            config.include_user_features ? config.user_meta_path : std::string{},
            config.include_item_features ? config.item_meta_path : std::string{},
            config.include_situation_features ? std::vector<std::string>{}
                                              : std::vector<std::string>{});
        if (!config.include_situation_features) {
            // drop situation features from the schema entirely
            auto& feats = corpus.schema.features;
            feats.erase(std::remove_if(feats.begin(), feats.end(),
                                       [](const FeatureDesc& f) {
                                           return f.scope == FeatureScope::Situation;
                                       }),
                        feats.end());
            for (auto& split : corpus.splits)
                for (auto& r : split) r.situation.clear();
        }
    }
    if (config.use_cache) save_cache(corpus, cache_path, fp);
    return corpus;
}

struct RunOutcome {
    MetricReport test_report;
    TrainResult train_result;
    std::string backbone_hash_before, backbone_hash_after;
};

// End-to-end single run: build the model, train (with a frozen backbone when
// re-ranking), evaluate on test, optionally save a checkpoint.
inline RunOutcome run_task(const RunConfig& config, const Corpus& corpus,
                           std::ostream* log = nullptr) {
    config.validate();
    Rng rng(config.random_seed);
    RunOutcome outcome;

    std::unique_ptr<Scorer<float>> backbone;
    if (config.is_reranker()) {
        CheckpointManifest manifest;
        backbone = load_checkpoint<float>(config.base_model_path, corpus, &manifest);
        if (!config.base_model_name.empty() && manifest.model_name != config.base_model_name)
            throw std::runtime_error("checkpoint model " + manifest.model_name +
                                     " does not match base_model_name " +
                                     config.base_model_name);
        outcome.backbone_hash_before = checkpoint_params_hash(config.base_model_path);
    }

    RunConfig model_config = config;
    if (config.is_reranker()) {
        // the re-ranker consumes backbone embeddings of the backbone's size
        CheckpointManifest manifest = read_manifest(config.base_model_path);
        model_config.emb_size = manifest.hyperparams.emb_size;
    }
    auto scorer = init_model<float>(model_config, corpus, rng);

    TrainOptions opts;
    opts.log = log;
    if (scorer->trainable())
        outcome.train_result = train(*scorer, corpus, model_config, backbone.get(), opts);
    outcome.test_report = evaluate(*scorer, corpus, Split::Test, model_config, backbone.get());

    if (config.is_reranker()) {
        outcome.backbone_hash_after = checkpoint_params_hash(config.base_model_path);
        if (outcome.backbone_hash_after != outcome.backbone_hash_before)
            throw std::runtime_error("backbone checkpoint changed during re-ranker training");
    }
    if (!config.checkpoint_dir.empty()) {
        ModelHyperparams hp;
        hp.emb_size = model_config.emb_size;
        hp.hidden_sizes = model_config.hidden_sizes;
        hp.position_emb_size = model_config.position_emb_size;
        hp.max_list_length = model_config.max_list_length;
        hp.include_user_features = model_config.include_user_features;
        hp.include_item_features = model_config.include_item_features;
        hp.include_situation_features = model_config.include_situation_features;
        save_checkpoint(*scorer, hp, config.model_mode, corpus, config.checkpoint_dir);
    }
    return outcome;
}

inline RunOutcome run_task(const RunConfig& config, std::ostream* log = nullptr) {
    config.validate();
    Corpus corpus = load_corpus(config);
    return run_task(config, corpus, log);
}

}  // namespace recflex
