#include <catch2/catch_amalgamated.hpp>

#include "recflex/checkpoint.hpp"
#include "recflex/models/factory.hpp"

#include "temp_files.hpp"

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

template <typename T>
void zero_params(Scorer<T>& s) {
    for (auto& t : s.params()->tensors) std::fill(t.value.begin(), t.value.end(), T(0));
}

}  // namespace

TEST_CASE("matrix factorization scores a hand-computed dot product plus bias") {
    Corpus c = make_corpus(3, 4);
    ModelHyperparams hp;
    hp.emb_size = 2;
    Rng rng(0);
    BprMf<double> model(c, hp, rng);
    zero_params(model);
    auto& params = *model.params();
    double* pu = params.get("user_emb").row(1);
    pu[0] = 1.0;
    pu[1] = 2.0;
    double* qi = params.get("item_emb").row(2);
    qi[0] = 3.0;
    qi[1] = 4.0;
    params.get("item_bias").value[2] = 0.5;

    ScoreRequest<double> req;
    req.user_id = 1;
    req.candidates = {2, 0};
    auto scores = model.forward(req);
    CHECK(scores[0] == Catch::Approx(11.5).epsilon(1e-14));
    CHECK(scores[1] == 0.0);
    CHECK(model.item_embedding_table() == &params.get("item_emb"));
}

TEST_CASE("embedding models have the expected parameter counts") {
    Corpus c = make_corpus(10, 20);
    ModelHyperparams hp;
    hp.emb_size = 64;
    Rng rng(1);
    BprMf<float> mf(c, hp, rng);
    CHECK(mf.params()->total_params() == 10 * 64 + 20 * 64 + 20);
    Rng rng2(1);
    Fpmc<float> fpmc(c, hp, rng2);
    CHECK(fpmc.params()->total_params() == 10 * 64 + 3 * 20 * 64);
}

TEST_CASE("same seed gives bit-identical initialization") {
    Corpus c = make_corpus(5, 7);
    ModelHyperparams hp;
    hp.emb_size = 8;
    Rng a(42), b(42), other(43);
    BprMf<float> m1(c, hp, a), m2(c, hp, b), m3(c, hp, other);
    CHECK(m1.params()->snapshot() == m2.params()->snapshot());
    CHECK(m1.params()->snapshot() != m3.params()->snapshot());
}

TEST_CASE("embedding models reject non-positive dimensions") {
    Corpus c = make_corpus(2, 2);
    ModelHyperparams hp;
    hp.emb_size = 0;
    Rng rng(0);
    CHECK_THROWS(BprMf<float>(c, hp, rng));
    CHECK_THROWS(Fpmc<float>(c, hp, rng));
    CHECK_THROWS(WideDeep<float>(c, hp, rng));
    CHECK_THROWS(PrmLite<float>(c, hp, rng));
    CHECK_NOTHROW(Fm<float>(c, hp, rng));  // 0 = linear-only ablation
}

TEST_CASE("popularity baseline scores items by train frequency") {
    Corpus c = make_corpus(2, 3);
    c.item_train_count = {5, 0, 2};
    MostPopular<float> model(c);
    ScoreRequest<float> req;
    req.candidates = {0, 1, 2};
    CHECK(model.forward(req) == std::vector<float>{5.0f, 0.0f, 2.0f});
    CHECK(model.params() == nullptr);
    CHECK(!model.trainable());
    CHECK_NOTHROW(model.backward(req, {0.0f, 0.0f, 0.0f}));
}

TEST_CASE("sequential model adds a transition term from the last history item") {
    Corpus c = make_corpus(2, 3);
    ModelHyperparams hp;
    hp.emb_size = 2;
    Rng rng(3);
    Fpmc<double> model(c, hp, rng);
    zero_params(model);
    auto& p = *model.params();
    double* w = p.get("prev_emb").row(1);  // last history item
    w[0] = 1.0;
    w[1] = -1.0;
    double* z = p.get("next_emb").row(2);  // candidate
    z[0] = 0.5;
    z[1] = 0.25;

    ScoreRequest<double> no_hist;
    no_hist.user_id = 0;
    no_hist.candidates = {2};
    CHECK(model.forward(no_hist)[0] == 0.0);

    ScoreRequest<double> with_hist = no_hist;
    with_hist.history = {0, 1};  // last = item 1
    CHECK(model.forward(with_hist)[0] == Catch::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("factorization machine matches the brute-force pairwise expansion") {
    Corpus c = make_corpus(4, 6);
    // one categorical and one numeric item feature, one situation feature
    FeatureDesc genre;
    genre.name = "i_genre_c";
    genre.scope = FeatureScope::Item;
    genre.cardinality = 4;
    FeatureDesc price;
    price.name = "i_price_f";
    price.scope = FeatureScope::Item;
    price.categorical = false;
    FeatureDesc hour;
    hour.name = "c_hour_c";
    hour.scope = FeatureScope::Situation;
    hour.cardinality = 5;
    c.schema.features = {genre, price, hour};
    Rng fr(9);
    for (auto& row : c.item_features)
        row = {static_cast<float>(fr.uniform_int(0, 3)),
               static_cast<float>(fr.uniform() * 2 - 1)};

    ModelHyperparams hp;
    hp.emb_size = 3;
    hp.include_item_features = true;
    hp.include_situation_features = true;
    Rng rng(7);
    Fm<double> model(c, hp, rng);
    // spread the initialization so pairwise terms are non-trivial
    for (auto& t : model.params()->tensors)
        for (auto& v : t.value) v = fr.uniform() * 2.0 - 1.0;

    auto fields = detail::build_fields(c, hp);
    ScoreRequest<double> req;
    req.user_id = 2;
    req.candidates = {0, 3, 5};
    req.situation = {2.0};
    auto scores = model.forward(req);

    auto& p = *model.params();
    for (std::size_t ci = 0; ci < req.candidates.size(); ++ci) {
        std::int32_t item = req.candidates[ci];
        double expected = p.get("w0").value[0];
        std::vector<std::vector<double>> active;  // x * v rows
        for (const auto& f : fields) {
            auto [row, x] = detail::field_activation<double>(f, c, req.user_id, item,
                                                             req.situation);
            expected += p.get("w_" + f.name).value[static_cast<std::size_t>(row)] * x;
            const double* v = p.get("v_" + f.name).row(row);
            std::vector<double> scaled(v, v + hp.emb_size);
            for (auto& s : scaled) s *= x;
            active.push_back(std::move(scaled));
        }
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b)
                for (int d = 0; d < hp.emb_size; ++d) expected += active[a][d] * active[b][d];
        CHECK(scores[ci] == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("factorization machine with dimension zero is the linear model") {
    Corpus c = make_corpus(3, 3);
    ModelHyperparams hp;
    hp.emb_size = 0;
    Rng rng(5);
    Fm<double> model(c, hp, rng);
    zero_params(model);
    auto& p = *model.params();
    p.get("w0").value[0] = 0.7;
    p.get("w_user").value[1] = 0.2;
    p.get("w_item").value[2] = 0.1;
    ScoreRequest<double> req;
    req.user_id = 1;
    req.candidates = {2, 0};
    auto scores = model.forward(req);
    CHECK(scores[0] == Catch::Approx(1.0).epsilon(1e-14));
    CHECK(scores[1] == Catch::Approx(0.9).epsilon(1e-14));
}

TEST_CASE("wide-and-deep reduces to its output bias when all weights are zero") {
    Corpus c = make_corpus(3, 4);
    ModelHyperparams hp;
    hp.emb_size = 4;
    hp.hidden_sizes = {5, 3};
    Rng rng(11);
    WideDeep<double> model(c, hp, rng);
    zero_params(model);
    model.params()->get("b_out").value[0] = -0.25;
    ScoreRequest<double> req;
    req.user_id = 0;
    req.candidates = {1, 3};
    auto scores = model.forward(req);
    CHECK(scores[0] == Catch::Approx(-0.25));
    CHECK(scores[1] == Catch::Approx(-0.25));

    // hidden layers contribute through the ReLU path
    model.params()->get("b1").value[0] = 1.0;   // first hidden unit active
    model.params()->get("W2").row(0)[0] = 2.0;  // feeds second layer unit 0
    model.params()->get("b2").value[1] = -3.0;  // negative: gated off
    model.params()->get("w_out").value[0] = 0.5;
    model.params()->get("w_out").value[1] = 10.0;
    scores = model.forward(req);
    CHECK(scores[0] == Catch::Approx(-0.25 + 0.5 * 2.0));
}

TEST_CASE("re-ranker is equivariant to permutations of the candidate list") {
    Corpus c = make_corpus(2, 8);
    ModelHyperparams hp;
    hp.emb_size = 4;
    hp.position_emb_size = 3;
    hp.hidden_sizes = {6};
    hp.max_list_length = 10;
    Rng rng(21);
    PrmLite<double> model(c, hp, rng);
    CHECK(model.is_reranker());

    std::size_t L = 5;
    Rng data(33);
    std::vector<double> base(L);
    Matrix<double> emb(static_cast<std::int64_t>(L), hp.emb_size);
    for (std::size_t i = 0; i < L; ++i) {
        base[i] = data.uniform() * 2 - 1;
        for (int d = 0; d < hp.emb_size; ++d)
            emb.at(static_cast<std::int64_t>(i), d) = data.normal();
    }
    ScoreRequest<double> req;
    req.user_id = 1;
    req.candidates = {3, 1, 6, 0, 7};
    req.base_scores = &base;
    req.base_embeddings = &emb;
    auto scores = model.forward(req);

    std::vector<std::size_t> perm = {4, 2, 0, 1, 3};
    ScoreRequest<double> preq;
    preq.user_id = 1;
    std::vector<double> pbase(L);
    Matrix<double> pemb(static_cast<std::int64_t>(L), hp.emb_size);
    for (std::size_t i = 0; i < L; ++i) {
        preq.candidates.push_back(req.candidates[perm[i]]);
        pbase[i] = base[perm[i]];
        for (int d = 0; d < hp.emb_size; ++d)
            pemb.at(static_cast<std::int64_t>(i), d) =
                emb.at(static_cast<std::int64_t>(perm[i]), d);
    }
    preq.base_scores = &pbase;
    preq.base_embeddings = &pemb;
    auto pscores = model.forward(preq);
    for (std::size_t i = 0; i < L; ++i)
        CHECK(pscores[i] == Catch::Approx(scores[perm[i]]).margin(1e-12));
}

TEST_CASE("re-ranker validates its inputs") {
    Corpus c = make_corpus(2, 8);
    ModelHyperparams hp;
    hp.emb_size = 4;
    hp.max_list_length = 3;
    Rng rng(2);
    PrmLite<double> model(c, hp, rng);

    ScoreRequest<double> req;
    req.user_id = 0;
    req.candidates = {0, 1};
    CHECK_THROWS(model.forward(req));  // no base scores/embeddings

    std::vector<double> base = {0.1, 0.2};
    Matrix<double> bad_emb(2, 5);  // wrong width
    req.base_scores = &base;
    req.base_embeddings = &bad_emb;
    CHECK_THROWS(model.forward(req));

    Matrix<double> emb(2, 4);
    req.base_embeddings = &emb;
    CHECK_NOTHROW(model.forward(req));

    // a single-item list degenerates to self-attention with weight one
    std::vector<double> one_base = {0.4};
    Matrix<double> one_emb(1, 4);
    ScoreRequest<double> one;
    one.user_id = 0;
    one.candidates = {2};
    one.base_scores = &one_base;
    one.base_embeddings = &one_emb;
    CHECK(std::isfinite(model.forward(one)[0]));

    // list longer than the position table
    std::vector<double> long_base(4, 0.0);
    Matrix<double> long_emb(4, 4);
    ScoreRequest<double> too_long;
    too_long.user_id = 0;
    too_long.candidates = {0, 1, 2, 3};
    too_long.base_scores = &long_base;
    too_long.base_embeddings = &long_emb;
    CHECK_THROWS(model.forward(too_long));
}

TEST_CASE("model factory enforces task support") {
    CHECK(model_supports_mode("BPRMF", TaskMode::TopK));
    CHECK(model_supports_mode("BPRMF", TaskMode::Impression));
    CHECK(!model_supports_mode("BPRMF", TaskMode::CTR));
    CHECK(model_supports_mode("FM", TaskMode::CTR));
    CHECK(!model_supports_mode("FM", TaskMode::Impression));
    CHECK(!model_supports_mode("PRMLite", TaskMode::TopK));
    CHECK(model_supports_mode("PRMLite", TaskMode::Impression));
    CHECK(!model_supports_mode("NoSuchModel", TaskMode::TopK));

    Corpus c = make_corpus(2, 2);
    Rng rng(0);
    RunConfig config;
    config.model_name = "FM";
    config.model_mode = TaskMode::Impression;
    CHECK_THROWS(init_model<float>(config, c, rng));
    ModelHyperparams hp;
    CHECK_THROWS(init_model<float>("NoSuchModel", c, hp, rng));
}

TEST_CASE("checkpoints restore parameters bit-exactly") {
    TempDir dir;
    Corpus c = make_corpus(6, 9);
    ModelHyperparams hp;
    hp.emb_size = 5;
    Rng rng(77);
    BprMf<float> model(c, hp, rng);
    save_checkpoint(model, hp, TaskMode::TopK, c, dir / "ckpt");

    auto loaded = load_checkpoint<float>(dir / "ckpt", c);
    CHECK(loaded->name() == "BPRMF");
    CHECK(loaded->params()->snapshot() == model.params()->snapshot());
    CHECK(!checkpoint_params_hash(dir / "ckpt").empty());

    // saving the identical model twice produces identical parameter files
    save_checkpoint(model, hp, TaskMode::TopK, c, dir / "ckpt2");
    CHECK(checkpoint_params_hash(dir / "ckpt") == checkpoint_params_hash(dir / "ckpt2"));

    // a corpus with different id spaces is rejected
    Corpus other = make_corpus(6, 10);
    CHECK_THROWS_WITH(load_checkpoint<float>(dir / "ckpt", other),
                      Catch::Matchers::ContainsSubstring("fingerprint"));
}
