#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "idne/trainer.hpp"

using namespace idne;

namespace {

struct TwoClique {
    DocTermMatrix X;
    ReachabilityMatrix reach;
    LabelSet labels;
};

TwoClique two_clique_fixture() {
    const RawCorpus corpus = testutil::make_two_clique_corpus();
    const Vocabulary vocab = build_vocab(corpus);
    TwoClique out;
    out.X = vectorize(corpus, vocab);
    out.reach = build_delta(build_graph(corpus));
    out.labels = collect_labels(corpus);
    return out;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("pair_loss reference values and stability") {
    CHECK(pair_loss_from_score(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(pair_loss_from_score(0.0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // log(1 + e^50) = 50 + log1p(e^-50): the naive form overflows long before
    CHECK(pair_loss_from_score(50.0, 0) ==
          doctest::Approx(50.0 + std::log1p(std::exp(-50.0))).epsilon(1e-12));
    CHECK(std::isfinite(pair_loss_from_score(5000.0, 0)));
    CHECK(std::isfinite(pair_loss_from_score(-5000.0, 1)));
    CHECK(pair_loss({1.0, 0.0}, {0.0, 1.0}, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("adam_step: zero gradient at step one leaves parameters unchanged") {
    ModelParams p = init_params(3, 2, 2, 1);
    const ModelParams before = p;
    AdamState state = AdamState::zeros(p);
    BatchGradients grads;
    grads.grad_W = Matrix(3, 2);
    grads.grad_T = Matrix(2, 2);
    TrainConfig cfg;
    adam_step(p, grads, state, cfg);
    CHECK(p.W.data == before.W.data);
    CHECK(p.T.data == before.T.data);
    CHECK(state.step == 1);
}

TEST_CASE("adam_step: bias-corrected first step moves by lr*c/(|c|+eps)") {
    ModelParams p = init_params(2, 1, 2, 3);
    const ModelParams before = p;
    AdamState state = AdamState::zeros(p);
    BatchGradients grads;
    grads.grad_W = Matrix(2, 2, 0.3);
    grads.grad_T = Matrix(1, 2, -0.7);
    TrainConfig cfg;
    adam_step(p, grads, state, cfg);
    const double expected_w = -cfg.learning_rate * 0.3 / (0.3 + cfg.adam_eps);
    const double expected_t = -cfg.learning_rate * (-0.7) / (0.7 + cfg.adam_eps);
    for (std::size_t i = 0; i < p.W.data.size(); ++i)
        CHECK(p.W.data[i] - before.W.data[i] == doctest::Approx(expected_w).epsilon(1e-12));
    for (std::size_t i = 0; i < p.T.data.size(); ++i)
        CHECK(p.T.data[i] - before.T.data[i] == doctest::Approx(expected_t).epsilon(1e-12));
    // which is -lr*sign(c) up to eps
    CHECK(expected_w == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
}

TEST_CASE("adam_step: constant gradient drives the update magnitude to lr") {
    ModelParams p = init_params(1, 1, 1, 5);
    AdamState state = AdamState::zeros(p);
    BatchGradients grads;
    grads.grad_W = Matrix(1, 1, 0.25);
    grads.grad_T = Matrix(1, 1, 0.25);
    TrainConfig cfg;
    double prev = p.W.data[0];
    double step_size = 0.0;
    for (int i = 0; i < 2000; ++i) {
        adam_step(p, grads, state, cfg);
        step_size = prev - p.W.data[0];
        prev = p.W.data[0];
    }
    CHECK(step_size == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
}

TEST_CASE("adam_step aborts on non-finite gradients") {
    ModelParams p = init_params(2, 1, 2, 3);
    AdamState state = AdamState::zeros(p);
    BatchGradients grads;
    grads.grad_W = Matrix(2, 2, 0.0);
    grads.grad_T = Matrix(1, 2, 0.0);
    grads.grad_W.at(1, 1) = std::nan("");
    CHECK_THROWS_WITH_AS(adam_step(p, grads, state, TrainConfig{}),
                         doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("gradients match central finite differences on 20 random instances") {
    double worst = 0.0;
    std::size_t nontrivial = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = testutil::make_small_instance(derive_seed(777, "grad", trial));
        const auto result = testutil::finite_difference_check(inst.params, inst.X, inst.batch);
        worst = std::max(worst, result.max_rel_error);
        if (result.max_gradient > 1e-4) ++nontrivial;
        CHECK(result.max_rel_error < 1e-4);
    }
    CHECK(nontrivial == 20);  // generator guarantees a live pair per instance
    MESSAGE("worst relative error over 20 instances: ", worst);
}

TEST_CASE("a pair of all-fallback documents contributes zero gradient") {
    ModelParams p;
    p.n_words = 2, p.n_topics = 1, p.dim = 2;
    p.W = Matrix(2, 2);
    p.W.at(0, 0) = -1.0;
    p.W.at(1, 0) = -2.0;
    p.T = Matrix(1, 2);
    p.T.at(0, 0) = 1.0;  // every topic-word dot product negative
    DocTermMatrix X;
    X.n_docs = 2;
    X.n_terms = 2;
    X.rows = {{{0, 1}}, {{1, 2}}};
    PairBatch batch;
    batch.pairs.push_back({0, 1, 1});
    const BatchGradients grads = batch_gradients(p, X, batch);
    for (double g : grads.grad_W.data) CHECK(g == 0.0);
    for (double g : grads.grad_T.data) CHECK(g == 0.0);
    CHECK(grads.mean_loss == doctest::Approx(std::log(2.0)));  // s = 0
}

TEST_CASE("duplicated pair equals the single pair after averaging") {
    const auto inst = testutil::make_small_instance(derive_seed(3, "dup", 0));
    PairBatch one, two;
    one.pairs.push_back(inst.batch.pairs[0]);
    two.pairs.push_back(inst.batch.pairs[0]);
    two.pairs.push_back(inst.batch.pairs[0]);
    const BatchGradients g1 = batch_gradients(inst.params, inst.X, one);
    const BatchGradients g2 = batch_gradients(inst.params, inst.X, two);
    CHECK(g1.mean_loss == doctest::Approx(g2.mean_loss).epsilon(1e-14));
    for (std::size_t i = 0; i < g1.grad_W.data.size(); ++i)
        CHECK(g1.grad_W.data[i] == doctest::Approx(g2.grad_W.data[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < g1.grad_T.data.size(); ++i)
        CHECK(g1.grad_T.data[i] == doctest::Approx(g2.grad_T.data[i]).epsilon(1e-12));
}

TEST_CASE("batch_gradients rejects pairs into all-zero rows") {
    const auto inst = testutil::make_small_instance(derive_seed(4, "zr", 0));
    DocTermMatrix X = inst.X;
    X.rows[0].clear();
    X.empty_rows.push_back(0);
    PairBatch batch;
    batch.pairs.push_back({0, 1, 1});
    CHECK_THROWS_AS(batch_gradients(inst.params, X, batch), std::invalid_argument);
}

TEST_CASE("train validates its configuration") {
    const TwoClique fix = two_clique_fixture();
    TrainConfig cfg;
    cfg.steps = 0;
    CHECK_THROWS_AS(train(fix.X, fix.reach, cfg), std::invalid_argument);
    cfg.steps = 10;
    cfg.batch_size = 7;
    CHECK_THROWS_AS(train(fix.X, fix.reach, cfg), std::invalid_argument);
    cfg.batch_size = 8;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(fix.X, fix.reach, cfg), std::invalid_argument);
}

TEST_CASE("train is bit-for-bit deterministic per seed") {
    const TwoClique fix = two_clique_fixture();
    TrainConfig cfg;
    cfg.n_topics = 2;
    cfg.dim = 8;
    cfg.steps = 60;
    cfg.batch_size = 8;
    cfg.seed = 2025;
    const TrainReport a = train(fix.X, fix.reach, cfg);
    const TrainReport b = train(fix.X, fix.reach, cfg);
    CHECK(a.params.W.data == b.params.W.data);
    CHECK(a.params.T.data == b.params.T.data);
    CHECK(a.loss_curve == b.loss_curve);

    TrainConfig other = cfg;
    other.seed = 2026;
    const TrainReport c = train(fix.X, fix.reach, other);
    CHECK(a.params.W.data != c.params.W.data);
}

TEST_CASE("training on the planted cliques drives the loss down") {
    const TwoClique fix = two_clique_fixture();
    TrainConfig cfg;
    cfg.n_topics = 4;
    cfg.dim = 32;
    cfg.steps = 300;
    cfg.learning_rate = 0.01;
    cfg.seed = 99;
    const TrainReport report = train(fix.X, fix.reach, cfg);
    REQUIRE(report.loss_curve.size() == 300);
    for (double l : report.loss_curve) CHECK(std::isfinite(l));
    double lead = 0.0, trail = 0.0;
    for (int i = 0; i < 50; ++i) lead += report.loss_curve[i];
    for (int i = 250; i < 300; ++i) trail += report.loss_curve[i];
    CHECK(trail < lead);
    CHECK(report.flagged_docs == 0);

    // finite parameters after the run
    for (double v : report.params.W.data) CHECK(std::isfinite(v));
    for (double v : report.params.T.data) CHECK(std::isfinite(v));
}

}  // TEST_SUITE
