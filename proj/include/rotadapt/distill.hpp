#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rotadapt/checkpoint.hpp"
#include "rotadapt/model.hpp"
#include "rotadapt/trainer.hpp"
#include "rotadapt/types.hpp"

namespace rotadapt {

struct DistillConfig {
    int epochs = 10;
    double base_lr = 0.01;      // applied uniformly to trunk and heads
    double lr_drop = 0.1;       // multiplied in every lr_drop_every epochs
    int lr_drop_every = 3;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int batch_size = 32;
    uint64_t seed = 1;
    bool select_best_val = false;  // default: final-epoch checkpoint
    void validate() const;
};

// Arithmetic mean of the teachers' class probabilities.
Tensor ensemble_probs(const std::vector<Model*>& teachers, const Tensor& batch);

struct DistillHooks {
    std::function<void(const std::string&)> log;
    std::filesystem::path checkpoint_path;  // persisted at every epoch end
    const Pool* eval_pool = nullptr;        // labeled; enables per-epoch `kd val` lines
    PoolAccessCounters* counters = nullptr;
};

// Stage-2 self-distillation: minimizes kd_loss(ensemble_probs(teachers, x),
// student class logits) over the unlabeled pool, one seeded-shuffle pass per
// epoch. Teachers are never mutated. epochs == 0 returns the student as-is.
Checkpoint distill_train(const DistillConfig& cfg, const Pool& unlabeled,
                         const std::vector<Model*>& teachers, Model& student,
                         const DistillHooks& hooks = {});

}  // namespace rotadapt
