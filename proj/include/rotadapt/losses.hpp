#pragma once

#include <map>
#include <string>
#include <vector>

#include "rotadapt/model.hpp"
#include "rotadapt/pretext.hpp"
#include "rotadapt/rng.hpp"
#include "rotadapt/types.hpp"

namespace rotadapt {

// Logits in, probabilities out; rows along the channel axis (h = w = 1).
Tensor softmax_probs(const Tensor& logits);

// Mean of -log softmax(logits)[label].
double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);
// Same, and when grad_scale != 0 writes grad_scale * d(loss)/d(logits).
double cross_entropy_with_grad(const Tensor& logits, const std::vector<int>& labels,
                               Tensor* dlogits, double grad_scale);

struct SupervisedLosses {
    double source = 0.0;
    double target = 0.0;
};
// Empty target batch (UDA) yields target = 0.
SupervisedLosses supervised_losses(Model& model, const Batch& source, const Batch& target);

double rotation_loss(Model& model, const Tensor& unlabeled, Rng& rng);
double entropy_loss(Model& model, const Tensor& unlabeled);

// Mean KL(teacher || softmax(student_logits)); teacher rows must be valid
// probability vectors.
double kd_loss(const Tensor& teacher_probs, const Tensor& student_logits);
double kd_loss_with_grad(const Tensor& teacher_probs, const Tensor& student_logits,
                         Tensor* dlogits, double grad_scale);

// The adversarial direction and the frozen clean-branch probabilities; both
// are constants of the VAT objective (the clean branch takes no gradient).
struct VatPerturbation {
    Tensor r_adv;
    Tensor clean_probs;
};
VatPerturbation compute_vat_perturbation(Model& model, const Tensor& x,
                                         const VatParams& params, Rng& rng);
// Mean KL(clean_probs || p(x + r_adv)); when grad_scale != 0 accumulates
// grad_scale * d(loss)/d(params) through the perturbed branch.
double vat_loss_at(Model& model, const Tensor& x, const VatPerturbation& pert,
                   double grad_scale);
double vat_loss(Model& model, const Tensor& unlabeled, const VatParams& params, Rng& rng);

struct LossReport {
    double total = 0.0;
    std::map<std::string, double> components;  // sup_source, sup_target, ssl, ent, vat
};

// `iter=<n> total=<v> sup_s=<v> sup_t=<v> ssl=<v> ent=<v> vat=<v>`
std::string format_log_line(int iteration, const LossReport& r);

struct ObjectiveBatches {
    const Batch* source = nullptr;     // labeled source
    const Batch* target = nullptr;     // labeled target; null in UDA
    const Batch* unlabeled = nullptr;  // unlabeled target
};

struct ObjectiveOptions {
    bool compute_grad = true;
    // Testing hook: evaluate the VAT term at a fixed perturbation instead of
    // running power iteration (finite differences must hold r_adv and the
    // clean-branch probabilities constant).
    const VatPerturbation* frozen_vat = nullptr;
    // Required when config.pretext == jigsaw.
    const JigsawPermutationSet* jigsaw = nullptr;
};

// Evaluates every active term of the stage-1 objective; when
// opts.compute_grad is set, accumulates d(total)/d(params) into the model's
// gradient buffers. Component values are reported unweighted. Inactive terms
// (zero weight or missing batch) are reported as 0 and never computed, so an
// S+T run touches no unlabeled data.
LossReport combined_objective(Model& model, const ObjectiveBatches& batches,
                              const LossWeights& weights, const TrainConfig& config,
                              Rng& rng, const ObjectiveOptions& opts = {});

}  // namespace rotadapt
