#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rotadapt/checkpoint.hpp"
#include "rotadapt/losses.hpp"
#include "rotadapt/model.hpp"
#include "rotadapt/types.hpp"

namespace rotadapt {

// Cycling iterator over a pool: seeded shuffle per epoch, every example
// visited exactly once per epoch.
class PoolCycler {
public:
    PoolCycler(const Pool& pool, Rng rng);
    std::vector<int> next(int count);
    int64_t reads() const { return reads_; }
    int epochs_started() const { return epochs_; }

private:
    void reshuffle();

    const Pool* pool_;
    Rng rng_;
    std::vector<int> order_;
    size_t pos_ = 0;
    int epochs_ = 0;
    int64_t reads_ = 0;
};

// Builds a batch from pool[idx...]; labels are attached only when every
// gathered example carries one.
Batch gather_examples(const Pool& pool, const std::vector<int>& idx);

// Fraction of examples whose argmax class logit equals the label (eval mode).
double evaluate(Model& model, const Pool& pool);

struct PoolAccessCounters {
    std::map<std::string, int64_t> reads;  // labeled_source, labeled_target, ...
};

struct TrainHooks {
    std::function<void(const std::string&)> log;  // one line per call
    std::filesystem::path checkpoint_path;        // when set, best model persisted here
    PoolAccessCounters* counters = nullptr;
    const JigsawPermutationSet* jigsaw = nullptr;  // overrides the internally built set
};

// Stage-1 loop of the combined objective; returns the checkpoint with the
// best validation accuracy (an evaluation always happens at the final
// iteration). total_iterations == 0 evaluates the initial model once.
Checkpoint train_stage1(const TrainConfig& config, const DatasetSplit& split, Model& model,
                        const TrainHooks& hooks = {});

}  // namespace rotadapt
