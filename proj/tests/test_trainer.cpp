#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rotadapt/errors.hpp"
#include "rotadapt/optim.hpp"
#include "rotadapt/trainer.hpp"
#include "test_util.hpp"

using namespace rotadapt;
using namespace testutil;

namespace {

Param* find_param(Model& m, const std::string& name) {
    for (Param* p : m.params())
        if (p->name == name) return p;
    REQUIRE(false);
    return nullptr;
}

double parse_field(const std::string& line, const std::string& key) {
    const auto pos = line.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(line.substr(pos + key.size() + 1));
}

// Small labeled split over random images; enough structure for the loop
// mechanics (not for learning).
DatasetSplit toy_split(int num_classes, uint64_t seed) {
    Rng rng(seed);
    DatasetSplit s;
    s.labeled_source = labeled_pool(12, 1, 6, 6, num_classes, rng, "src");
    s.labeled_target = labeled_pool(6, 1, 6, 6, num_classes, rng, "tgt");
    s.unlabeled_target = strip_labels(labeled_pool(10, 1, 6, 6, num_classes, rng, "unl"));
    s.val_target = labeled_pool(6, 1, 6, 6, num_classes, rng, "val");
    s.test_target = labeled_pool(6, 1, 6, 6, num_classes, rng, "tst");
    return s;
}

TrainConfig toy_config(int iters, int eval_every) {
    TrainConfig cfg;
    cfg.total_iterations = iters;
    cfg.eval_every = eval_every;
    cfg.batch_source = 4;
    cfg.batch_target = 3;
    cfg.batch_unlabeled = 4;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("lr_at matches the inverse-decay formula") {
    CHECK(lr_at(0.0, 0.25) == 0.25);
    CHECK(lr_at(1.0, 1.0) == doctest::Approx(0.16556002607617017258).epsilon(1e-9));
    CHECK(lr_at(1.0, 0.01) == doctest::Approx(0.0016556002607617017).epsilon(1e-9));

    double prev = lr_at(0.0, 1.0);
    for (int i = 1; i <= 20; ++i) {
        const double cur = lr_at(i / 20.0, 1.0);
        CHECK(cur < prev);
        prev = cur;
    }
    // alpha = 0 freezes the schedule.
    CHECK(lr_at(0.7, 0.5, 0.0, 0.75) == 0.5);

    CHECK_THROWS_AS(lr_at(-0.1, 1.0), InputError);
    CHECK_THROWS_AS(lr_at(1.1, 1.0), InputError);
}

TEST_CASE("sgd_step: plain step, group learning rates, weight decay") {
    Model m(tiny_spec(3));
    // Zero gradients, zero decay: nothing moves.
    std::vector<double> ones(m.weight_count(), 1.0);
    m.set_flat_weights(ones);
    SgdState st;
    sgd_step(m, st, 0.1, 0.2, 0.0, 0.0);
    CHECK(m.flat_weights() == ones);

    // One unit gradient in each group; lr_trunk and lr_heads differ.
    Param* trunk_w = find_param(m, "trunk.conv1.weight");
    Param* head_w = find_param(m, "class_head.fc.weight");
    trunk_w->g[0] = 1.0;
    head_w->g[0] = 1.0;
    sgd_step(m, st, 0.1, 0.2, 0.0, 0.0);
    CHECK(trunk_w->w[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(head_w->w[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(trunk_w->w[1] == 1.0);  // untouched entries stay put

    // Weight decay alone: v = wd * theta.
    Model m2(tiny_spec(3));
    m2.set_flat_weights(std::vector<double>(m2.weight_count(), 1.0));
    SgdState st2;
    sgd_step(m2, st2, 0.1, 0.1, 0.0, 0.5);
    for (double w : m2.flat_weights()) CHECK(w == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("sgd_step momentum recursion hand-unrolled to -0.29") {
    Model m(tiny_spec(3));  // all parameters start at zero
    Param* p = find_param(m, "class_head.fc.bias");
    SgdState st;
    p->g[0] = 1.0;
    sgd_step(m, st, 0.1, 0.1, 0.9, 0.0);
    CHECK(p->w[0] == -0.1);
    p->g[0] = 1.0;  // sgd_step consumes g but does not clear it; reset explicitly
    sgd_step(m, st, 0.1, 0.1, 0.9, 0.0);
    const double v2 = 0.9 * 1.0 + 1.0;      // momentum recursion, second step
    CHECK(p->w[0] == -0.1 - 0.1 * v2);      // -0.29, same arithmetic as the update
    CHECK(p->w[0] == doctest::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("sgd_step rejects non-finite gradients and names the parameter") {
    Model m(tiny_spec(3));
    Param* p = find_param(m, "class_head.fc.bias");
    p->g[0] = std::numeric_limits<double>::infinity();
    SgdState st;
    try {
        sgd_step(m, st, 0.1, 0.1, 0.9, 0.0);
        CHECK(false);
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("class_head.fc.bias") != std::string::npos);
    }
}

TEST_CASE("pool cycler visits every example once per epoch") {
    Rng rng(1);
    Pool pool = labeled_pool(10, 1, 4, 4, 3, rng);
    PoolCycler c(pool, Rng(2));
    std::vector<int> epoch = c.next(10);
    std::vector<int> sorted = epoch;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(10);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);
    CHECK(c.reads() == 10);
    CHECK(c.epochs_started() == 2);  // refilled immediately at the boundary

    // Batches spanning an epoch boundary still cover each epoch exactly once.
    PoolCycler d(pool, Rng(3));
    std::vector<int> a = d.next(6), b = d.next(6), e = d.next(8);
    std::vector<int> all;
    for (auto* v : {&a, &b, &e}) all.insert(all.end(), v->begin(), v->end());
    std::sort(all.begin(), all.begin() + 10);
    CHECK(std::vector<int>(all.begin(), all.begin() + 10) == iota);
    std::sort(all.begin() + 10, all.end());
    CHECK(std::vector<int>(all.begin() + 10, all.end()) == iota);

    // Determinism.
    PoolCycler c1(pool, Rng(7)), c2(pool, Rng(7));
    CHECK(c1.next(25) == c2.next(25));

    Pool empty;
    CHECK_THROWS_AS(PoolCycler(empty, Rng(1)), ConfigError);
}

TEST_CASE("gather_examples attaches labels only when every example has one") {
    Rng rng(4);
    Pool pool = labeled_pool(5, 1, 4, 4, 3, rng);
    Batch b = gather_examples(pool, {0, 2, 4});
    CHECK(b.x.n == 3);
    REQUIRE(b.y.size() == 3);
    CHECK(b.y[1] == *pool[2].label);
    for (size_t j = 0; j < pool[2].image.v.size(); ++j)
        CHECK(b.x.image(1)[j] == pool[2].image.v[j]);

    pool[2].label.reset();
    Batch u = gather_examples(pool, {0, 2});
    CHECK(u.y.empty());

    CHECK_THROWS_AS(gather_examples(pool, {}), InputError);
    Pool ragged = pool;
    ragged[1].image = Image(3, 3, 1);
    CHECK_THROWS_AS(gather_examples(ragged, {0, 1}), InputError);
}

TEST_CASE("evaluate: constant class-0 predictor on an all-zero-label pool") {
    Model m(tiny_spec(3));
    for (Param* p : m.params())
        if (p->name == "class_head.fc.bias") p->w = {5.0, 0.0, 0.0};
    Rng rng(5);
    Pool pool = labeled_pool(20, 1, 6, 6, 3, rng);
    for (Example& ex : pool) ex.label = 0;
    CHECK(evaluate(m, pool) == 1.0);
}

TEST_CASE("evaluate on 100k random labels with a constant model lands near 1/4") {
    Model m(tiny_spec(4));  // zero weights: every logit ties, argmax picks class 0
    Pool pool;
    pool.reserve(100000);
    Rng rng(6);
    Example proto;
    proto.image = Image(6, 6, 1);
    for (int i = 0; i < 100000; ++i) {
        Example ex = proto;
        ex.label = static_cast<int>(rng.uniform_int(4));
        ex.id = "p/" + std::to_string(i);
        pool.push_back(std::move(ex));
    }
    const double acc = evaluate(m, pool);
    CHECK(acc >= 0.245);
    CHECK(acc <= 0.255);
}

TEST_CASE("evaluate is duplication-invariant and rejects unlabeled examples") {
    Model m = dense_random_model(tiny_spec(3), 7);
    Rng rng(8);
    Pool pool = labeled_pool(9, 1, 6, 6, 3, rng);
    const double acc = evaluate(m, pool);
    Pool doubled = pool;
    for (Example ex : pool) {
        ex.id += "/dup";
        doubled.push_back(std::move(ex));
    }
    CHECK(evaluate(m, doubled) == doctest::Approx(acc).epsilon(1e-12));

    Pool bad = pool;
    bad[3].label.reset();
    CHECK_THROWS_AS(evaluate(m, bad), InputError);
    Pool empty;
    CHECK_THROWS_AS(evaluate(m, empty), InputError);
}

TEST_CASE("train_stage1 validates pools up front") {
    DatasetSplit split = toy_split(3, 9);
    Model m(tiny_spec(3));
    Rng ir(10);
    m.init_params(ir);
    TrainConfig cfg = toy_config(4, 2);

    DatasetSplit no_src = split;
    no_src.labeled_source.clear();
    CHECK_THROWS_AS(train_stage1(cfg, no_src, m), ConfigError);

    DatasetSplit no_tgt = split;
    no_tgt.labeled_target.clear();
    CHECK_THROWS_AS(train_stage1(cfg, no_tgt, m), ConfigError);

    TrainConfig rot = cfg;
    rot.weights.lambda_ssl = 1.0;
    DatasetSplit no_unl = split;
    no_unl.unlabeled_target.clear();
    CHECK_THROWS_AS(train_stage1(rot, no_unl, m), ConfigError);

    DatasetSplit no_val = split;
    no_val.val_target.clear();
    CHECK_THROWS_AS(train_stage1(cfg, no_val, m), ConfigError);

    // UDA: lambda_t = 0 runs without labeled target data.
    TrainConfig uda = cfg;
    uda.weights.lambda_t = 0.0;
    DatasetSplit uda_split = split;
    uda_split.labeled_target.clear();
    Model m2(tiny_spec(3));
    Rng ir2(11);
    m2.init_params(ir2);
    Checkpoint ck = train_stage1(uda, uda_split, m2);
    CHECK(ck.iteration >= 0);

    // Pretext width mismatch is rejected before training.
    TrainConfig jig = cfg;
    jig.weights.lambda_ssl = 1.0;
    jig.pretext = PretextKind::jigsaw;
    jig.jigsaw_grid = 2;
    jig.jigsaw_perm_count = 12;  // model head is 4-wide
    Model m3(tiny_spec(3));
    Rng ir3(12);
    m3.init_params(ir3);
    CHECK_THROWS_AS(train_stage1(jig, split, m3), ConfigError);
}

TEST_CASE("train_stage1 with zero iterations evaluates the initial model once") {
    DatasetSplit split = toy_split(3, 13);
    Model m(tiny_spec(3));
    Rng ir(14);
    m.init_params(ir);
    std::vector<std::string> log;
    TrainHooks hooks;
    hooks.log = [&log](const std::string& l) { log.push_back(l); };
    TrainConfig cfg = toy_config(0, 1);
    Checkpoint ck = train_stage1(cfg, split, m, hooks);
    CHECK(ck.iteration == 0);
    REQUIRE(log.size() == 1);
    CHECK(log[0].rfind("val iter=0 acc=", 0) == 0);
    CHECK(ck.val_accuracy == parse_field(log[0], "acc"));
}

TEST_CASE("iteration-1 loss equals the constant-logit anchor") {
    // Freshly initialized heads emit zero logits, so the first iteration's
    // loss is a closed form: lam_s*lnC + lam_t*lnC + lam_ssl*ln4 + lam_ent*lnC.
    const int C = 3;
    auto first_total = [&](LossWeights w) {
        DatasetSplit split = toy_split(C, 15);
        Model m(tiny_spec(C));
        Rng ir(16);
        m.init_params(ir);
        TrainConfig cfg = toy_config(2, 2);
        cfg.weights = w;
        std::vector<std::string> log;
        TrainHooks hooks;
        hooks.log = [&log](const std::string& l) { log.push_back(l); };
        train_stage1(cfg, split, m, hooks);
        for (const auto& l : log)
            if (l.rfind("iter=1 ", 0) == 0) return parse_field(l, "total");
        REQUIRE(false);
        return 0.0;
    };
    const double lnC = std::log(3.0), ln4 = std::log(4.0);

    CHECK(first_total({1, 1, 0, 0, 0}) ==
          doctest::Approx(2 * lnC).epsilon(0.02));
    CHECK(first_total({1, 1, 1, 0, 0}) ==
          doctest::Approx(2 * lnC + ln4).epsilon(0.02));
    CHECK(first_total({1, 1, 1, 0.01, 0}) ==
          doctest::Approx(2 * lnC + ln4 + 0.01 * lnC).epsilon(0.02));
}

TEST_CASE("train_stage1 is bit-deterministic for a fixed seed") {
    auto run = [&]() {
        DatasetSplit split = toy_split(3, 17);
        Model m(tiny_spec(3));
        Rng ir(18);
        m.init_params(ir);
        TrainConfig cfg = toy_config(6, 3);
        cfg.weights.lambda_ssl = 1.0;
        cfg.weights.lambda_ent = 0.1;
        return train_stage1(cfg, split, m);
    };
    Checkpoint a = run(), b = run();
    CHECK(a.weights == b.weights);
    CHECK(a.val_accuracy == b.val_accuracy);
    CHECK(a.iteration == b.iteration);
    CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("pure-source training reads neither target pool") {
    DatasetSplit split = toy_split(3, 19);
    Model m(tiny_spec(3));
    Rng ir(20);
    m.init_params(ir);
    TrainConfig cfg = toy_config(4, 2);
    cfg.weights = {1, 0, 0, 0, 0};
    PoolAccessCounters counters;
    TrainHooks hooks;
    hooks.counters = &counters;
    train_stage1(cfg, split, m, hooks);
    CHECK(counters.reads["labeled_source"] == 4 * cfg.batch_source);
    CHECK(counters.reads["labeled_target"] == 0);
    CHECK(counters.reads["unlabeled_target"] == 0);
    CHECK(counters.reads["val_target"] > 0);
}

TEST_CASE("S+T training never touches the unlabeled pool") {
    DatasetSplit split = toy_split(3, 21);
    Model m(tiny_spec(3));
    Rng ir(22);
    m.init_params(ir);
    TrainConfig cfg = toy_config(4, 2);  // lambda = (1,1,0,0,0)
    PoolAccessCounters counters;
    TrainHooks hooks;
    hooks.counters = &counters;
    train_stage1(cfg, split, m, hooks);
    CHECK(counters.reads["unlabeled_target"] == 0);
    CHECK(counters.reads["labeled_source"] == 4 * cfg.batch_source);
    CHECK(counters.reads["labeled_target"] == 4 * cfg.batch_target);
}

TEST_CASE("best checkpoint is the max over logged evaluations, including the final one") {
    DatasetSplit split = toy_split(3, 23);
    Model m(tiny_spec(3));
    Rng ir(24);
    m.init_params(ir);
    TrainConfig cfg = toy_config(7, 3);  // evals at 3, 6, and the final 7
    cfg.weights.lambda_ssl = 1.0;
    std::vector<std::string> log;
    TrainHooks hooks;
    hooks.log = [&log](const std::string& l) { log.push_back(l); };
    Checkpoint best = train_stage1(cfg, split, m, hooks);

    std::vector<std::pair<int, double>> evals;
    for (const auto& l : log)
        if (l.rfind("val iter=", 0) == 0)
            evals.emplace_back(static_cast<int>(parse_field(l, "iter")),
                               parse_field(l, "acc"));
    REQUIRE(evals.size() == 3);
    CHECK(evals[0].first == 3);
    CHECK(evals[1].first == 6);
    CHECK(evals.back().first == 7);
    double mx = -1.0;
    for (auto& [it, acc] : evals) mx = std::max(mx, acc);
    CHECK(best.val_accuracy == mx);
}

TEST_CASE("checkpoint hook persists the best model") {
    auto dir = scratch_dir("trainer_ckpt");
    DatasetSplit split = toy_split(3, 25);
    Model m(tiny_spec(3));
    Rng ir(26);
    m.init_params(ir);
    TrainConfig cfg = toy_config(4, 2);
    TrainHooks hooks;
    hooks.checkpoint_path = dir / "best.ckpt";
    Checkpoint best = train_stage1(cfg, split, m, hooks);
    Checkpoint loaded = load_checkpoint(dir / "best.ckpt");
    CHECK(loaded.weights == best.weights);
    CHECK(loaded.val_accuracy == best.val_accuracy);
    CHECK(loaded.config_hash == cfg.hash());
}

TEST_CASE("ssl-only training leaves the zero class head untouched but moves the trunk") {
    DatasetSplit split = toy_split(3, 27);
    Model m(tiny_spec(3));
    Rng ir(28);
    m.init_params(ir);
    const std::vector<double> trunk_before = [&] {
        std::vector<double> v;
        for (Param* p : m.trunk_params()) v.insert(v.end(), p->w.begin(), p->w.end());
        return v;
    }();
    TrainConfig cfg = toy_config(5, 5);
    cfg.weights = {0, 0, 1, 0, 0};
    train_stage1(cfg, split, m);

    for (Param* p : m.params())
        if (p->name.rfind("class_head.", 0) == 0)
            for (double w : p->w) CHECK(w == 0.0);
    std::vector<double> trunk_after;
    for (Param* p : m.trunk_params())
        trunk_after.insert(trunk_after.end(), p->w.begin(), p->w.end());
    CHECK(trunk_after != trunk_before);
}

TEST_CASE("jigsaw pretext trains end to end with a matching head") {
    DatasetSplit split = toy_split(3, 29);
    ModelSpec spec = tiny_spec(3, 12);
    Model m(spec);
    Rng ir(30);
    m.init_params(ir);
    TrainConfig cfg = toy_config(3, 3);
    cfg.weights.lambda_ssl = 1.0;
    cfg.pretext = PretextKind::jigsaw;
    cfg.jigsaw_grid = 2;
    cfg.jigsaw_perm_count = 12;
    Checkpoint ck = train_stage1(cfg, split, m);
    CHECK(ck.iteration >= 1);
    CHECK(ck.val_accuracy >= 0.0);
}

TEST_CASE("source_and_target pretext variant trains end to end") {
    DatasetSplit split = toy_split(3, 31);
    Model m(tiny_spec(3));
    Rng ir(32);
    m.init_params(ir);
    TrainConfig cfg = toy_config(3, 3);
    cfg.weights.lambda_ssl = 1.0;
    cfg.pretext_domains = PretextDomains::source_and_target;
    Checkpoint ck = train_stage1(cfg, split, m);
    CHECK(ck.iteration >= 1);
}
