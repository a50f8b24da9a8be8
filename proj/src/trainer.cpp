#include "rotadapt/trainer.hpp"

#include <cstdio>

#include "rotadapt/errors.hpp"
#include "rotadapt/optim.hpp"

namespace rotadapt {

PoolCycler::PoolCycler(const Pool& pool, Rng rng) : pool_(&pool), rng_(rng) {
    if (pool.empty()) throw ConfigError("cannot cycle an empty pool");
    order_.resize(pool.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    reshuffle();
}

void PoolCycler::reshuffle() {
    rng_.shuffle(order_);
    pos_ = 0;
    ++epochs_;
}

std::vector<int> PoolCycler::next(int count) {
    std::vector<int> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        out.push_back(order_[pos_++]);
        if (pos_ == order_.size()) reshuffle();
    }
    reads_ += count;
    return out;
}

Batch gather_examples(const Pool& pool, const std::vector<int>& idx) {
    if (idx.empty()) throw InputError("gather_examples: empty index list");
    const Image& first = pool.at(idx[0]).image;
    Batch b;
    b.x = Tensor(static_cast<int>(idx.size()), first.c, first.h, first.w);
    bool all_labeled = true;
    for (size_t i = 0; i < idx.size(); ++i) {
        const Example& ex = pool.at(idx[i]);
        if (ex.image.h != first.h || ex.image.w != first.w || ex.image.c != first.c)
            throw InputError("gather_examples: image dimensions differ within pool");
        std::copy(ex.image.v.begin(), ex.image.v.end(), b.x.image(static_cast<int>(i)));
        all_labeled = all_labeled && ex.label.has_value();
    }
    if (all_labeled) {
        b.y.reserve(idx.size());
        for (int i : idx) b.y.push_back(*pool.at(i).label);
    }
    return b;
}

double evaluate(Model& model, const Pool& pool) {
    if (pool.empty()) throw InputError("evaluate: empty pool");
    const bool was_training = model.is_training();
    model.set_train(false);
    int correct = 0;
    const int batch = 64;
    for (size_t start = 0; start < pool.size(); start += batch) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(pool.size(), start + batch); ++i) {
            if (!pool[i].label)
                throw InputError("evaluate: unlabeled example '" + pool[i].id + "' in pool");
            idx.push_back(static_cast<int>(i));
        }
        const Batch b = gather_examples(pool, idx);
        const Tensor logits = model.forward_class(b.x);
        for (int i = 0; i < logits.n; ++i) {
            const double* row = logits.image(i);
            int arg = 0;
            for (int c = 1; c < logits.c; ++c)
                if (row[c] > row[arg]) arg = c;
            correct += arg == b.y[i];
        }
    }
    model.set_train(was_training);
    return static_cast<double>(correct) / static_cast<double>(pool.size());
}

namespace {

std::string format_val_line(int iteration, double acc) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "val iter=%d acc=%.6g", iteration, acc);
    return buf;
}

void check_labeled(const Pool& pool, const char* name) {
    for (const Example& ex : pool)
        if (!ex.label)
            throw ConfigError(std::string(name) + " pool contains unlabeled example '" +
                              ex.id + "'");
}

}  // namespace

Checkpoint train_stage1(const TrainConfig& config, const DatasetSplit& split, Model& model,
                        const TrainHooks& hooks) {
    config.validate();
    const LossWeights& w = config.weights;
    auto log = [&hooks](const std::string& line) {
        if (hooks.log) hooks.log(line);
    };

    const bool need_source =
        w.lambda_s > 0.0 || (w.lambda_ssl > 0.0 &&
                             config.pretext_domains == PretextDomains::source_and_target);
    const bool need_target = w.lambda_t > 0.0;
    const bool need_unlabeled = w.lambda_ssl > 0.0 || w.lambda_ent > 0.0 || w.lambda_vat > 0.0;

    if (need_source && split.labeled_source.empty())
        throw ConfigError("labeled_source pool is empty but the objective needs it");
    if (need_target && split.labeled_target.empty())
        throw ConfigError("labeled_target pool is empty but lambda_t > 0 (use UDA mode "
                          "with lambda_t = 0 when no target labels exist)");
    if (need_unlabeled && split.unlabeled_target.empty())
        throw ConfigError("unlabeled_target pool is empty but an unlabeled-data term is active");
    if (split.val_target.empty())
        throw ConfigError("val_target pool is empty; checkpoint selection needs validation data");
    check_labeled(split.val_target, "val_target");
    if (need_source) check_labeled(split.labeled_source, "labeled_source");
    if (need_target) check_labeled(split.labeled_target, "labeled_target");

    // Pretext head width must match the task.
    JigsawPermutationSet built_jigsaw;
    const JigsawPermutationSet* jigsaw = hooks.jigsaw;
    Rng root(config.seed);
    Rng rng_src = root.derive(0x737263ull);   // "src"
    Rng rng_tgt = root.derive(0x746774ull);   // "tgt"
    Rng rng_unl = root.derive(0x756E6Cull);   // "unl"
    Rng rng_loss = root.derive(0x6C6F73ull);  // "los"
    Rng rng_jig = root.derive(0x6A6967ull);   // "jig"
    if (w.lambda_ssl > 0.0 && config.pretext == PretextKind::jigsaw && !jigsaw) {
        built_jigsaw =
            build_jigsaw_permutations(config.jigsaw_perm_count, config.jigsaw_grid, rng_jig);
        jigsaw = &built_jigsaw;
    }
    if (w.lambda_ssl > 0.0) {
        const int want = config.pretext == PretextKind::rotation ? 4 : jigsaw->size();
        if (model.spec().pretext_outputs != want)
            throw ConfigError("pretext head width " +
                              std::to_string(model.spec().pretext_outputs) +
                              " does not match task width " + std::to_string(want));
    }

    const uint64_t cfg_hash = config.hash();
    Checkpoint best;
    double best_acc = -1.0;
    auto run_eval = [&](int iteration) {
        const double acc = evaluate(model, split.val_target);
        if (hooks.counters)
            hooks.counters->reads["val_target"] += static_cast<int64_t>(split.val_target.size());
        log(format_val_line(iteration, acc));
        if (acc > best_acc) {
            best_acc = acc;
            best = Checkpoint::of_model(model, iteration, acc, config.seed, cfg_hash);
            if (!hooks.checkpoint_path.empty()) save_checkpoint(hooks.checkpoint_path, best);
        }
    };

    if (config.total_iterations == 0) {
        run_eval(0);
        return best;
    }

    std::optional<PoolCycler> src_cycler, tgt_cycler, unl_cycler;
    if (need_source) src_cycler.emplace(split.labeled_source, rng_src);
    if (need_target) tgt_cycler.emplace(split.labeled_target, rng_tgt);
    if (need_unlabeled) unl_cycler.emplace(split.unlabeled_target, rng_unl);

    SgdState opt;
    model.set_train(true);
    for (int t = 1; t <= config.total_iterations; ++t) {
        Batch src, tgt, unl;
        ObjectiveBatches batches;
        if (src_cycler) {
            src = gather_examples(split.labeled_source, src_cycler->next(config.batch_source));
            batches.source = &src;
            if (hooks.counters) hooks.counters->reads["labeled_source"] += config.batch_source;
        }
        if (tgt_cycler) {
            tgt = gather_examples(split.labeled_target, tgt_cycler->next(config.batch_target));
            batches.target = &tgt;
            if (hooks.counters) hooks.counters->reads["labeled_target"] += config.batch_target;
        }
        if (unl_cycler) {
            unl = gather_examples(split.unlabeled_target,
                                  unl_cycler->next(config.batch_unlabeled));
            unl.y.clear();  // belt and braces: the objective never sees labels here
            batches.unlabeled = &unl;
            if (hooks.counters)
                hooks.counters->reads["unlabeled_target"] += config.batch_unlabeled;
        }

        Rng rng_iter = rng_loss.derive(static_cast<uint64_t>(t));
        ObjectiveOptions opts;
        opts.jigsaw = jigsaw;
        LossReport report;
        try {
            model.zero_grad();
            report = combined_objective(model, batches, w, config, rng_iter, opts);
            log(format_log_line(t, report));
            const double p = static_cast<double>(t) / config.total_iterations;
            sgd_step(model, opt,
                     lr_at(p, config.lr_trunk, config.schedule_alpha, config.schedule_beta),
                     lr_at(p, config.lr_heads, config.schedule_alpha, config.schedule_beta),
                     config.momentum, config.weight_decay);
        } catch (const NumericError& e) {
            // The best checkpoint written so far stays on disk.
            throw NumericError("iteration " + std::to_string(t) + ": " + e.what());
        }

        if (t % config.eval_every == 0 || t == config.total_iterations) run_eval(t);
    }
    return best;
}

}  // namespace rotadapt
