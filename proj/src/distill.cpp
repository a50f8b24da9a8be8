#include "rotadapt/distill.hpp"

#include <cmath>
#include <cstdio>

#include "rotadapt/config_file.hpp"
#include "rotadapt/errors.hpp"
#include "rotadapt/losses.hpp"
#include "rotadapt/optim.hpp"

namespace rotadapt {

void DistillConfig::validate() const {
    // epochs == 0 is the explicit pass-through run.
    if (epochs < 0) throw ConfigError("distill: epochs must be nonnegative");
    if (base_lr < 0.0) throw ConfigError("distill: base_lr must be nonnegative");
    if (!(lr_drop > 0.0 && lr_drop <= 1.0)) throw ConfigError("distill: lr_drop must be in (0,1]");
    if (lr_drop_every < 1) throw ConfigError("distill: lr_drop_every must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("distill: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("distill: weight_decay must be nonnegative");
    if (batch_size < 1) throw ConfigError("distill: batch_size must be >= 1");
}

Tensor ensemble_probs(const std::vector<Model*>& teachers, const Tensor& batch) {
    if (teachers.empty()) throw InputError("ensemble_probs: need at least one teacher");
    const int c = teachers[0]->spec().num_classes;
    for (Model* t : teachers)
        if (t->spec().num_classes != c)
            throw InputError("ensemble_probs: teachers disagree on class count");

    Tensor mean;
    for (size_t i = 0; i < teachers.size(); ++i) {
        const bool was_training = teachers[i]->is_training();
        teachers[i]->set_train(false);
        Tensor p = softmax_probs(teachers[i]->forward_class(batch));
        teachers[i]->set_train(was_training);
        if (i == 0) {
            mean = std::move(p);
        } else {
            for (size_t j = 0; j < mean.v.size(); ++j) mean.v[j] += p.v[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(teachers.size());
    for (double& v : mean.v) v *= inv;
    return mean;
}

namespace {

std::string format_kd_line(int iteration, double loss) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "kd iter=%d total=%.6g", iteration, loss);
    return buf;
}

}  // namespace

Checkpoint distill_train(const DistillConfig& cfg, const Pool& unlabeled,
                         const std::vector<Model*>& teachers, Model& student,
                         const DistillHooks& hooks) {
    cfg.validate();
    if (teachers.empty()) throw ConfigError("distill: need at least one teacher");
    const int c = student.spec().num_classes;
    for (const Model* t : teachers)
        if (t->spec().num_classes != c)
            throw ConfigError("distill: teacher class count does not match student");
    auto log = [&hooks](const std::string& line) {
        if (hooks.log) hooks.log(line);
    };

    char cfgbuf[256];
    std::snprintf(cfgbuf, sizeof(cfgbuf),
                  "epochs=%d\nbase_lr=%.17g\nlr_drop=%.17g\nlr_drop_every=%d\n"
                  "momentum=%.17g\nweight_decay=%.17g\nbatch_size=%d\nseed=%llu\n",
                  cfg.epochs, cfg.base_lr, cfg.lr_drop, cfg.lr_drop_every, cfg.momentum,
                  cfg.weight_decay, cfg.batch_size,
                  static_cast<unsigned long long>(cfg.seed));
    const uint64_t cfg_hash = fnv1a64(std::string(cfgbuf));

    double last_acc = 0.0;
    auto eval_student = [&](int iteration) {
        if (!hooks.eval_pool) return 0.0;
        const double acc = evaluate(student, *hooks.eval_pool);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "kd val iter=%d acc=%.6g", iteration, acc);
        log(buf);
        return acc;
    };

    if (cfg.epochs == 0) {
        last_acc = eval_student(0);
        Checkpoint out = Checkpoint::of_model(student, 0, last_acc, cfg.seed, cfg_hash);
        if (!hooks.checkpoint_path.empty()) save_checkpoint(hooks.checkpoint_path, out);
        return out;
    }
    if (unlabeled.empty()) throw ConfigError("distill: unlabeled pool is empty");

    Rng root(cfg.seed);
    PoolCycler cycler(unlabeled, root.derive(0x706F6Cull));  // "pol"

    SgdState opt;
    student.set_train(true);
    Checkpoint result;
    double best_acc = -1.0;
    int iteration = 0;
    const int batches_per_epoch =
        static_cast<int>((unlabeled.size() + cfg.batch_size - 1) / cfg.batch_size);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.base_lr * std::pow(cfg.lr_drop, (epoch - 1) / cfg.lr_drop_every);
        double epoch_loss = 0.0;
        // One full pass: the last batch of the epoch may be short.
        int remaining = static_cast<int>(unlabeled.size());
        for (int b = 0; b < batches_per_epoch; ++b) {
            const int take = std::min(cfg.batch_size, remaining);
            remaining -= take;
            Batch batch = gather_examples(unlabeled, cycler.next(take));
            batch.y.clear();  // never read labels, even if present
            if (hooks.counters) hooks.counters->reads["unlabeled_target"] += take;

            const Tensor targets = ensemble_probs(teachers, batch.x);
            ++iteration;
            try {
                student.zero_grad();
                Tensor dlogits;
                const double loss = kd_loss_with_grad(
                    targets, student.forward_class(batch.x), &dlogits, 1.0);
                student.backward_class(dlogits, true);
                sgd_step(student, opt, lr, lr, cfg.momentum, cfg.weight_decay);
                epoch_loss += loss * take;
                log(format_kd_line(iteration, loss));
            } catch (const NumericError& e) {
                // The checkpoint written at the previous epoch end stays on disk.
                throw NumericError("kd iteration " + std::to_string(iteration) + ": " +
                                   e.what());
            }
        }
        char buf[96];
        std::snprintf(buf, sizeof(buf), "kd epoch=%d mean=%.6g lr=%.6g", epoch,
                      epoch_loss / static_cast<double>(unlabeled.size()), lr);
        log(buf);
        last_acc = eval_student(iteration);

        Checkpoint snap = Checkpoint::of_model(student, iteration, last_acc, cfg.seed, cfg_hash);
        if (cfg.select_best_val) {
            if (last_acc > best_acc) {
                best_acc = last_acc;
                result = snap;
                if (!hooks.checkpoint_path.empty())
                    save_checkpoint(hooks.checkpoint_path, result);
            }
        } else {
            result = snap;
            if (!hooks.checkpoint_path.empty()) save_checkpoint(hooks.checkpoint_path, result);
        }
    }
    return result;
}

}  // namespace rotadapt
