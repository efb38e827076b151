#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "recflex/runners.hpp"

using namespace recflex;

namespace {

Corpus make_corpus(std::int32_t n_users, std::int32_t n_items) {
    Corpus c;
    c.n_users = n_users;
    c.n_items = n_items;
    c.user_history.assign(static_cast<std::size_t>(n_users), {});
    c.item_train_count.assign(static_cast<std::size_t>(n_items), 0);
    c.user_features.assign(static_cast<std::size_t>(n_users), {});
    c.item_features.assign(static_cast<std::size_t>(n_items), {});
    return c;
}

void add_train_positive(Corpus& c, std::int32_t user, std::int32_t item, std::int64_t time) {
    InteractionRecord r;
    r.user_id = user;
    r.item_id = item;
    r.time = time;
    c.split(Split::Train).push_back(r);
    c.user_history[user].emplace_back(time, item);
    c.item_train_count[item] += 1;
}

void add_eval(Corpus& c, Split split, std::int32_t user, std::int32_t item,
              std::int64_t time, std::vector<std::int32_t> negs = {}) {
    InteractionRecord r;
    r.user_id = user;
    r.item_id = item;
    r.time = time;
    if (!negs.empty()) {
        r.has_neg_items = true;
        r.neg_items = std::move(negs);
    }
    c.split(split).push_back(r);
}

// 4 users x 8 items; every user has train positives and held-out dev/test items
Corpus small_topk_corpus() {
    Corpus c = make_corpus(4, 8);
    std::int64_t t = 0;
    for (std::int32_t u = 0; u < 4; ++u) {
        add_train_positive(c, u, u, ++t);
        add_train_positive(c, u, (u + 1) % 4, ++t);
    }
    for (std::int32_t u = 0; u < 4; ++u) {
        add_eval(c, Split::Dev, u, 4 + (u % 2), 100 + u);
        add_eval(c, Split::Test, u, 6 + (u % 2), 200 + u);
    }
    return c;
}

// Impression corpus: per group, labels mark which items were clicked.
void add_group(Corpus& c, Split split, const std::string& id, std::int32_t user,
               std::int64_t time, const std::vector<std::int32_t>& items,
               const std::vector<std::int8_t>& labels) {
    ImpressionGroup g;
    g.impression_id = id;
    g.user_id = user;
    g.time = time;
    g.items = items;
    g.labels = labels;
    for (std::size_t i = 0; i < items.size(); ++i) {
        g.record_indices.push_back(c.split(split).size());
        InteractionRecord r;
        r.user_id = user;
        r.item_id = items[i];
        r.time = time;
        r.label = labels[i];
        r.impression_id = id;
        c.split(split).push_back(r);
        if (split == Split::Train && labels[i] == 1) {
            c.user_history[user].emplace_back(time, items[i]);
            c.item_train_count[items[i]] += 1;
        }
    }
    c.impression_split(split).push_back(std::move(g));
}

Corpus small_impression_corpus() {
    Corpus c = make_corpus(3, 8);
    std::int64_t t = 0;
    for (std::int32_t u = 0; u < 3; ++u) {
        add_group(c, Split::Train, "tr" + std::to_string(u) + "a", u, ++t,
                  {0, 1, 2, 3}, {1, 0, 0, 1});
        add_group(c, Split::Train, "tr" + std::to_string(u) + "b", u, ++t,
                  {4, 5, 6}, {0, 1, 0});
        add_group(c, Split::Dev, "de" + std::to_string(u), u, 100 + u,
                  {2, 3, 7}, {0, 1, 0});
        add_group(c, Split::Test, "te" + std::to_string(u), u, 200 + u,
                  {1, 6, 7}, {0, 0, 1});
    }
    // one dev group without positives: must be excluded, not averaged
    add_group(c, Split::Dev, "de_nopos", 0, 150, {5, 6}, {0, 0});
    return c;
}

// Scores the held-out target highest for its user, everything else by -item.
class OracleScorer final : public Scorer<float> {
public:
    explicit OracleScorer(std::map<std::int32_t, std::int32_t> target)
        : target_(std::move(target)) {}
    std::string name() const override { return "Oracle"; }
    std::vector<float> forward(const ScoreRequest<float>& req) const override {
        std::vector<float> out;
        auto it = target_.find(req.user_id);
        for (auto i : req.candidates)
            out.push_back(it != target_.end() && i == it->second
                              ? 1000.0f
                              : -static_cast<float>(i));
        return out;
    }
    void backward(const ScoreRequest<float>&, const std::vector<float>&) override {}

private:
    std::map<std::int32_t, std::int32_t> target_;
};

// Records every candidate list it is asked to score.
class RecordingScorer final : public Scorer<float> {
public:
    std::string name() const override { return "Recorder"; }
    std::vector<float> forward(const ScoreRequest<float>& req) const override {
        seen.push_back(req.candidates);
        std::vector<float> out;
        for (auto i : req.candidates) out.push_back(-static_cast<float>(i));
        return out;
    }
    void backward(const ScoreRequest<float>&, const std::vector<float>&) override {}
    mutable std::vector<std::vector<std::int32_t>> seen;
};

// Re-ranker that passes backbone scores through unchanged.
class IdentityReranker final : public Scorer<float> {
public:
    std::string name() const override { return "Identity"; }
    bool is_reranker() const override { return true; }
    std::vector<float> forward(const ScoreRequest<float>& req) const override {
        if (!req.base_scores) throw std::runtime_error("missing base scores");
        return *req.base_scores;
    }
    void backward(const ScoreRequest<float>&, const std::vector<float>&) override {}
};

RunConfig topk_config() {
    RunConfig config;
    config.model_mode = TaskMode::TopK;
    config.model_name = "BPRMF";
    config.emb_size = 4;
    config.test_num_neg = 3;
    config.topk = {1, 3};
    config.epochs = 5;
    config.patience = 10;
    config.batch_size = 4;
    return config;
}

}  // namespace

TEST_CASE("negative sampling avoids train positives and is seed-deterministic") {
    Corpus c = small_topk_corpus();
    Rng a(9), b(9), other(10);
    auto n1 = sample_negatives(a, 0, 4, c);
    auto n2 = sample_negatives(b, 0, 4, c);
    CHECK(n1 == n2);
    CHECK(n1.size() == 4);
    for (auto i : n1) {
        CHECK(i != 0);  // user 0's train positives are items 0 and 1
        CHECK(i != 1);
    }
    std::set<std::int32_t> unique(n1.begin(), n1.end());
    CHECK(unique.size() == n1.size());

    // different seed draws a different set often enough to matter
    bool any_diff = false;
    for (int t = 0; t < 10 && !any_diff; ++t)
        any_diff = sample_negatives(other, 0, 4, c) != n1;
    CHECK(any_diff);
}

TEST_CASE("negative sampling excludes the evaluation target and reports shortfalls") {
    Corpus c = small_topk_corpus();
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        auto negs = sample_negatives(rng, 0, 5, c, 7);
        for (auto i : negs) CHECK(i != 7);
    }
    // user 0 has 6 eligible items (8 minus 2 train positives); excluding one
    // target leaves 5, so asking for 6 must fail and name the count
    CHECK_THROWS_WITH(sample_negatives(rng, 0, 6, c, 7),
                      Catch::Matchers::ContainsSubstring("5 eligible"));
    // the enumerate-everything fallback path still avoids blocked items
    auto all = sample_negatives(rng, 0, 5, c, 7);
    std::set<std::int32_t> got(all.begin(), all.end());
    CHECK(got == std::set<std::int32_t>{2, 3, 4, 5, 6});
}

TEST_CASE("ranking evaluation scores one target against sampled negatives") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();

    std::map<std::int32_t, std::int32_t> targets;
    for (const auto& r : c.split(Split::Test)) targets[r.user_id] = r.item_id;
    OracleScorer oracle(targets);
    auto report = evaluate_topk(oracle, c, Split::Test, config);
    CHECK(report.n_lists == 4);
    CHECK(report.at("HR@1") == 1.0);
    CHECK(report.at("NDCG@1") == 1.0);
    CHECK(report.at("HR@3") == 1.0);
}

TEST_CASE("evaluation candidates are stable across calls and epochs") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    RecordingScorer first, second;
    evaluate_topk(first, c, Split::Dev, config);
    evaluate_topk(second, c, Split::Dev, config);
    CHECK(first.seen == second.seen);
    for (std::size_t i = 0; i < first.seen.size(); ++i) {
        const auto& cand = first.seen[i];
        CHECK(cand.size() == 1 + static_cast<std::size_t>(config.test_num_neg));
        CHECK(cand[0] == c.split(Split::Dev)[i].item_id);
    }

    // a different base seed draws different negatives
    RunConfig other = config;
    other.random_seed = 1234;
    RecordingScorer third;
    evaluate_topk(third, c, Split::Dev, other);
    CHECK(third.seen != first.seen);
}

TEST_CASE("given negative candidate lists are used verbatim") {
    Corpus c = small_topk_corpus();
    for (auto& r : c.split(Split::Dev)) {
        r.has_neg_items = true;
        r.neg_items = {2, 3};
    }
    RunConfig config = topk_config();
    RecordingScorer rec;
    evaluate_topk(rec, c, Split::Dev, config);
    for (std::size_t i = 0; i < rec.seen.size(); ++i)
        CHECK(rec.seen[i] == std::vector<std::int32_t>{c.split(Split::Dev)[i].item_id, 2, 3});
}

TEST_CASE("impression evaluation averages over lists with positives") {
    Corpus c = small_impression_corpus();
    RunConfig config;
    config.model_mode = TaskMode::Impression;
    config.topk = {1, 2};
    RecordingScorer rec;  // scores by -item: ascending item order
    auto report = evaluate_impressions(rec, c, Split::Dev, config);
    CHECK(report.n_lists == 3);
    CHECK(report.n_excluded == 1);
    // dev groups are {2,3,7} with item 3 positive: rank 2 under -item scoring
    CHECK(report.at("HR@1") == 0.0);
    CHECK(report.at("HR@2") == 1.0);
    CHECK(report.at("NDCG@2") == Catch::Approx(1.0 / std::log2(3.0)));
    CHECK(report.at("MAP@2") == Catch::Approx(0.5));
    CHECK(report.at("Recall@2") == Catch::Approx(1.0));
}

TEST_CASE("an identity re-ranker reproduces its backbone's ranking metrics") {
    Corpus c = small_impression_corpus();
    RunConfig config;
    config.model_mode = TaskMode::Impression;
    config.topk = {1, 3};
    ModelHyperparams hp;
    hp.emb_size = 4;
    Rng rng(5);
    BprMf<float> backbone(c, hp, rng);
    IdentityReranker identity;
    auto direct = evaluate_impressions(backbone, c, Split::Test, config);
    auto reranked = evaluate_impressions(identity, c, Split::Test, config, &backbone);
    CHECK(reranked.entries == direct.entries);
    CHECK_THROWS(evaluate_impressions(identity, c, Split::Test, config));  // no backbone
}

TEST_CASE("CTR evaluation reports AUC and log loss over sigmoid scores") {
    Corpus c = make_corpus(2, 4);
    add_train_positive(c, 0, 0, 1);
    for (std::int32_t i = 0; i < 4; ++i) {
        InteractionRecord r;
        r.user_id = i % 2;
        r.item_id = i;
        r.time = 10 + i;
        r.label = static_cast<std::int8_t>(i < 2 ? 1 : 0);
        c.split(Split::Test).push_back(r);
    }
    RunConfig config;
    config.model_mode = TaskMode::CTR;
    config.num_neg = 0;
    RecordingScorer rec;  // score -item: items 0,1 (positives) score highest
    auto report = evaluate_ctr(rec, c, Split::Test, config);
    CHECK(report.n_interactions == 4);
    CHECK(report.at("AUC") == 1.0);
    CHECK(report.at("LogLoss") > 0.0);

    c.split(Split::Test)[0].label = -1;
    CHECK_THROWS_WITH(evaluate_ctr(rec, c, Split::Test, config),
                      Catch::Matchers::ContainsSubstring("label"));
}

TEST_CASE("training stops after the configured number of non-improving epochs") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    config.epochs = 200;
    config.patience = 10;
    Rng rng(0);
    auto model = init_model<float>(config, c, rng);

    // scripted dev curve: improves at epochs 1 and 2, then plateaus (ties do
    // not count as improvement)
    TrainOptions opts;
    std::vector<std::vector<float>> snapshots;
    opts.eval_override = [&](int epoch) {
        snapshots.push_back(model->params()->snapshot());
        MetricReport r;
        r.entries["NDCG@5"] = epoch == 1 ? 0.5 : 0.6;
        r.n_lists = 1;
        return r;
    };
    config.main_metric = "NDCG@5";
    std::ostringstream log;
    opts.log = &log;
    auto result = train(*model, c, config, nullptr, opts);
    CHECK(result.epochs_run == 12);
    CHECK(result.best_epoch == 2);
    CHECK(result.best_metric == 0.6);
    // parameters are restored to the best epoch's snapshot
    CHECK(model->params()->snapshot() == snapshots[1]);
    CHECK(log.str().find("epoch 1 loss=") != std::string::npos);
    CHECK(log.str().find("[*best]") != std::string::npos);
}

TEST_CASE("zero patience stops at the first non-improvement") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    config.epochs = 50;
    config.patience = 0;
    config.main_metric = "NDCG@5";
    Rng rng(0);
    auto model = init_model<float>(config, c, rng);
    TrainOptions opts;
    opts.eval_override = [](int epoch) {
        MetricReport r;
        r.entries["NDCG@5"] = epoch <= 3 ? 0.1 * epoch : 0.05;
        r.n_lists = 1;
        return r;
    };
    auto result = train(*model, c, config, nullptr, opts);
    CHECK(result.epochs_run == 4);
    CHECK(result.best_epoch == 3);
}

TEST_CASE("lower-is-better metrics invert the improvement test") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    config.epochs = 50;
    config.patience = 2;
    config.main_metric = "LogLoss";
    Rng rng(0);
    auto model = init_model<float>(config, c, rng);
    TrainOptions opts;
    opts.eval_override = [](int epoch) {
        MetricReport r;
        r.entries["LogLoss"] = epoch <= 2 ? 1.0 / epoch : 5.0;
        r.n_lists = 1;
        return r;
    };
    auto result = train(*model, c, config, nullptr, opts);
    CHECK(result.best_epoch == 2);
    CHECK(result.epochs_run == 4);
}

TEST_CASE("full runs are bit-identical under the same seed") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    config.epochs = 3;
    auto a = run_task(config, c);
    auto b = run_task(config, c);
    CHECK(a.test_report == b.test_report);
    CHECK(a.train_result.train_losses == b.train_result.train_losses);

    RunConfig reseeded = config;
    reseeded.random_seed = 99;
    auto d = run_task(reseeded, c);
    CHECK(d.test_report.entries != a.test_report.entries);
}

TEST_CASE("non-trainable models skip training inside a run") {
    Corpus c = small_topk_corpus();
    RunConfig config = topk_config();
    config.model_name = "MostPopular";
    auto outcome = run_task(config, c);
    CHECK(outcome.train_result.epochs_run == 0);
    CHECK(outcome.test_report.n_lists == 4);
}

TEST_CASE("impression training skips groups a loss cannot use") {
    Corpus c = small_impression_corpus();
    // an all-positive train group: pairwise loss has no negatives there
    add_group(c, Split::Train, "tr_allpos", 0, 50, {6, 7}, {1, 1});
    RunConfig config;
    config.model_mode = TaskMode::Impression;
    config.model_name = "BPRMF";
    config.emb_size = 4;
    config.loss_name = "list_bpr";
    config.topk = {1, 3};
    config.epochs = 2;
    config.batch_size = 2;
    auto outcome = run_task(config, c);
    CHECK(outcome.train_result.epochs_run == 2);
    for (double l : outcome.train_result.train_losses) CHECK(std::isfinite(l));
}

TEST_CASE("invalid configurations are rejected up front") {
    RunConfig ctr;
    ctr.model_mode = TaskMode::CTR;
    ctr.model_name = "FM";
    ctr.num_neg = 1;
    CHECK_THROWS_WITH(ctr.validate(),
                      Catch::Matchers::Equals("num_neg must be 0 in CTR mode"));

    RunConfig rerank;
    rerank.model_name = "PRMLite";
    rerank.model_mode = TaskMode::Impression;
    rerank.num_neg = 0;
    CHECK_THROWS_WITH(rerank.validate(),
                      Catch::Matchers::ContainsSubstring("base_model_path"));

    RunConfig topk;
    topk.num_neg = 0;
    CHECK_THROWS(topk.validate());

    RunConfig loss;
    loss.loss_name = "hinge";
    CHECK_THROWS(loss.validate());
}
