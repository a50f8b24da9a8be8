#include "rotadapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "rotadapt/errors.hpp"

namespace rotadapt {

namespace {

constexpr double kProbFloor = 1e-12;

void check_logits(const Tensor& t, const char* who) {
    if (t.n < 1 || t.c < 1) throw InputError(std::string(who) + ": empty logits");
    if (t.h != 1 || t.w != 1)
        throw InputError(std::string(who) + ": logits must be Nx C x1x1");
    if (!all_finite(t)) throw NumericError(std::string(who) + ": non-finite logits");
}

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

// Per-example L2 normalization over the image; zero vectors stay zero.
void normalize_per_example(Tensor& t) {
    const size_t m = t.per_image();
    for (int i = 0; i < t.n; ++i) {
        double* p = t.image(i);
        double sq = 0.0;
        for (size_t j = 0; j < m; ++j) sq += p[j] * p[j];
        if (sq < 1e-60) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (size_t j = 0; j < m; ++j) p[j] *= inv;
    }
}

// Mean KL(p || softmax-of-q-logits) pieces shared by VAT and KD.
double mean_kl(const Tensor& p, const Tensor& q_probs) {
    double total = 0.0;
    for (int i = 0; i < p.n; ++i)
        for (int c = 0; c < p.c; ++c) {
            const double pi = p.at(i, c, 0, 0);
            if (pi <= 0.0) continue;
            total += pi * (safe_log(pi) - safe_log(q_probs.at(i, c, 0, 0)));
        }
    return total / p.n;
}

template <typename Fn>
auto with_component_name(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const VersionError& e) {
        throw VersionError(std::string(name) + ": " + e.what());
    } catch (const IntegrityError& e) {
        throw IntegrityError(std::string(name) + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

Tensor softmax_probs(const Tensor& logits) {
    check_logits(logits, "softmax_probs");
    Tensor out = logits;
    for (int i = 0; i < logits.n; ++i) {
        double* row = out.image(i);
        double mx = row[0];
        for (int c = 1; c < logits.c; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (int c = 0; c < logits.c; ++c) {
            row[c] = std::exp(row[c] - mx);
            sum += row[c];
        }
        for (int c = 0; c < logits.c; ++c) row[c] /= sum;
    }
    return out;
}

double cross_entropy_with_grad(const Tensor& logits, const std::vector<int>& labels,
                               Tensor* dlogits, double grad_scale) {
    check_logits(logits, "cross_entropy");
    if (labels.size() != static_cast<size_t>(logits.n))
        throw InputError("cross_entropy: one label per row required");
    for (int y : labels)
        if (y < 0 || y >= logits.c)
            throw InputError("cross_entropy: label " + std::to_string(y) +
                             " outside [0, " + std::to_string(logits.c) + ")");

    const Tensor probs = softmax_probs(logits);
    double loss = 0.0;
    for (int i = 0; i < logits.n; ++i) loss -= safe_log(probs.at(i, labels[i], 0, 0));
    loss /= logits.n;

    if (dlogits && grad_scale != 0.0) {
        *dlogits = probs;
        const double s = grad_scale / logits.n;
        for (int i = 0; i < logits.n; ++i) {
            double* row = dlogits->image(i);
            row[labels[i]] -= 1.0;
            for (int c = 0; c < logits.c; ++c) row[c] *= s;
        }
    }
    return loss;
}

double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
    return cross_entropy_with_grad(logits, labels, nullptr, 0.0);
}

namespace {

// Forward + CE (+ scaled backward) through either head.
double supervised_term(Model& model, const Tensor& x, const std::vector<int>& labels,
                       bool pretext_head, double grad_scale) {
    Tensor logits = pretext_head ? model.forward_pretext(x) : model.forward_class(x);
    Tensor dlogits;
    const double loss =
        cross_entropy_with_grad(logits, labels, grad_scale != 0.0 ? &dlogits : nullptr,
                                grad_scale);
    if (grad_scale != 0.0) {
        if (pretext_head)
            model.backward_pretext(dlogits, true);
        else
            model.backward_class(dlogits, true);
    }
    return loss;
}

double entropy_term(Model& model, const Tensor& x, double grad_scale) {
    Tensor logits = model.forward_class(x);
    const Tensor probs = softmax_probs(logits);
    double loss = 0.0;
    std::vector<double> h(probs.n, 0.0);
    for (int i = 0; i < probs.n; ++i) {
        const double* row = probs.image(i);
        for (int c = 0; c < probs.c; ++c)
            if (row[c] > 0.0) h[i] -= row[c] * safe_log(row[c]);
        loss += h[i];
    }
    loss /= probs.n;

    if (grad_scale != 0.0) {
        Tensor dlogits(probs.n, probs.c, 1, 1);
        const double s = grad_scale / probs.n;
        for (int i = 0; i < probs.n; ++i) {
            const double* row = probs.image(i);
            double* drow = dlogits.image(i);
            for (int c = 0; c < probs.c; ++c)
                drow[c] = s * row[c] * (-safe_log(row[c]) - h[i]);
        }
        model.backward_class(dlogits, true);
    }
    return loss;
}

Tensor concat_images(const Tensor& a, const Tensor& b) {
    Tensor out(a.n + b.n, a.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

double ssl_term(Model& model, const Tensor& x, const TrainConfig& config,
                const JigsawPermutationSet* jigsaw, Rng& rng, double grad_scale) {
    if (config.pretext == PretextKind::rotation) {
        RotationBatch rb = make_rotation_batch(x, rng);
        return supervised_term(model, rb.x, rb.labels, true, grad_scale);
    }
    if (!jigsaw)
        throw ConfigError("jigsaw pretext requires a permutation set");
    if (jigsaw->size() != model.spec().pretext_outputs)
        throw ConfigError("permutation set size " + std::to_string(jigsaw->size()) +
                          " does not match pretext head width " +
                          std::to_string(model.spec().pretext_outputs));
    JigsawBatch jb = make_jigsaw_batch(x, *jigsaw, rng);
    return supervised_term(model, jb.x, jb.labels, true, grad_scale);
}

}  // namespace

SupervisedLosses supervised_losses(Model& model, const Batch& source, const Batch& target) {
    if (source.empty()) throw InputError("supervised_losses: source batch is empty");
    SupervisedLosses out;
    out.source = supervised_term(model, source.x, source.y, false, 0.0);
    if (!target.empty()) out.target = supervised_term(model, target.x, target.y, false, 0.0);
    return out;
}

double rotation_loss(Model& model, const Tensor& unlabeled, Rng& rng) {
    if (unlabeled.n < 1) throw InputError("rotation_loss: empty batch");
    RotationBatch rb = make_rotation_batch(unlabeled, rng);
    return cross_entropy_loss(model.forward_pretext(rb.x), rb.labels);
}

double entropy_loss(Model& model, const Tensor& unlabeled) {
    if (unlabeled.n < 1) throw InputError("entropy_loss: empty batch");
    return entropy_term(model, unlabeled, 0.0);
}

double kd_loss_with_grad(const Tensor& teacher_probs, const Tensor& student_logits,
                         Tensor* dlogits, double grad_scale) {
    check_logits(student_logits, "kd_loss");
    if (!teacher_probs.same_shape(student_logits))
        throw InputError("kd_loss: teacher/student width mismatch");
    for (int i = 0; i < teacher_probs.n; ++i) {
        const double* row = teacher_probs.image(i);
        double sum = 0.0;
        for (int c = 0; c < teacher_probs.c; ++c) {
            if (row[c] < 0.0)
                throw InputError("kd_loss: teacher row has a negative probability");
            sum += row[c];
        }
        if (std::abs(sum - 1.0) > 1e-4)
            throw InputError("kd_loss: teacher row does not sum to 1");
    }

    const Tensor sprobs = softmax_probs(student_logits);
    const double loss = mean_kl(teacher_probs, sprobs);
    if (dlogits && grad_scale != 0.0) {
        *dlogits = sprobs;
        const double s = grad_scale / student_logits.n;
        for (size_t j = 0; j < dlogits->v.size(); ++j)
            dlogits->v[j] = s * (sprobs.v[j] - teacher_probs.v[j]);
    }
    return loss;
}

double kd_loss(const Tensor& teacher_probs, const Tensor& student_logits) {
    return kd_loss_with_grad(teacher_probs, student_logits, nullptr, 0.0);
}

VatPerturbation compute_vat_perturbation(Model& model, const Tensor& x,
                                         const VatParams& params, Rng& rng) {
    params.validate();
    if (x.n < 1) throw InputError("vat: empty batch");

    VatPerturbation pert;
    pert.clean_probs = softmax_probs(model.forward_class(x));

    Tensor d(x.n, x.c, x.h, x.w);
    for (double& v : d.v) v = rng.normal();
    normalize_per_example(d);

    for (int k = 0; k < params.power_iterations; ++k) {
        Tensor xp = x;
        for (size_t j = 0; j < xp.v.size(); ++j) xp.v[j] += params.xi * d.v[j];
        const Tensor q = softmax_probs(model.forward_class(xp));
        Tensor dlogits(q.n, q.c, 1, 1);
        for (size_t j = 0; j < dlogits.v.size(); ++j)
            dlogits.v[j] = (q.v[j] - pert.clean_probs.v[j]) / q.n;
        d = model.backward_class(dlogits, /*accum_param_grads=*/false);
        if (!all_finite(d)) throw NumericError("vat: non-finite perturbation gradient");
        normalize_per_example(d);
    }

    pert.r_adv = std::move(d);
    for (double& v : pert.r_adv.v) v *= params.epsilon;
    if (!all_finite(pert.r_adv)) throw NumericError("vat: non-finite perturbation");
    return pert;
}

double vat_loss_at(Model& model, const Tensor& x, const VatPerturbation& pert,
                   double grad_scale) {
    if (!pert.r_adv.same_shape(x)) throw InputError("vat: perturbation shape mismatch");
    Tensor xp = x;
    for (size_t j = 0; j < xp.v.size(); ++j) xp.v[j] += pert.r_adv.v[j];
    const Tensor q = softmax_probs(model.forward_class(xp));
    const double loss = mean_kl(pert.clean_probs, q);
    if (grad_scale != 0.0) {
        Tensor dlogits(q.n, q.c, 1, 1);
        const double s = grad_scale / q.n;
        for (size_t j = 0; j < dlogits.v.size(); ++j)
            dlogits.v[j] = s * (q.v[j] - pert.clean_probs.v[j]);
        model.backward_class(dlogits, true);
    }
    return loss;
}

double vat_loss(Model& model, const Tensor& unlabeled, const VatParams& params, Rng& rng) {
    const VatPerturbation pert = compute_vat_perturbation(model, unlabeled, params, rng);
    return vat_loss_at(model, unlabeled, pert, 0.0);
}

std::string format_log_line(int iteration, const LossReport& r) {
    auto get = [&r](const char* key) {
        auto it = r.components.find(key);
        return it == r.components.end() ? 0.0 : it->second;
    };
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "iter=%d total=%.6g sup_s=%.6g sup_t=%.6g ssl=%.6g ent=%.6g vat=%.6g",
                  iteration, r.total, get("sup_source"), get("sup_target"), get("ssl"),
                  get("ent"), get("vat"));
    return buf;
}

LossReport combined_objective(Model& model, const ObjectiveBatches& batches,
                              const LossWeights& weights, const TrainConfig& config,
                              Rng& rng, const ObjectiveOptions& opts) {
    weights.validate();

    // Streams are derived unconditionally so a term's activation state never
    // shifts another term's randomness.
    Rng rng_ssl = rng.derive(0x73736Cull);  // "ssl"
    Rng rng_vat = rng.derive(0x766174ull);  // "vat"

    const double gs = opts.compute_grad ? 1.0 : 0.0;
    LossReport r;
    auto& comp = r.components;
    comp["sup_source"] = comp["sup_target"] = comp["ssl"] = comp["ent"] = comp["vat"] = 0.0;

    const bool have_source = batches.source && !batches.source->empty();
    const bool have_target = batches.target && !batches.target->empty();
    const bool have_unlabeled = batches.unlabeled && batches.unlabeled->x.n > 0;

    if (weights.lambda_s > 0.0) {
        if (!have_source) throw ConfigError("sup_source: active term without a source batch");
        comp["sup_source"] = with_component_name("sup_source", [&] {
            return supervised_term(model, batches.source->x, batches.source->y, false,
                                   gs * weights.lambda_s);
        });
    }
    if (weights.lambda_t > 0.0 && have_target) {
        comp["sup_target"] = with_component_name("sup_target", [&] {
            return supervised_term(model, batches.target->x, batches.target->y, false,
                                   gs * weights.lambda_t);
        });
    }
    if (weights.lambda_ssl > 0.0) {
        if (!have_unlabeled) throw ConfigError("ssl: active term without an unlabeled batch");
        comp["ssl"] = with_component_name("ssl", [&] {
            Tensor in = batches.unlabeled->x;
            if (config.pretext_domains == PretextDomains::source_and_target) {
                if (!have_source)
                    throw ConfigError("source_and_target pretext without a source batch");
                in = concat_images(in, batches.source->x);
            }
            return ssl_term(model, in, config, opts.jigsaw, rng_ssl,
                            gs * weights.lambda_ssl);
        });
    }
    if (weights.lambda_ent > 0.0) {
        if (!have_unlabeled) throw ConfigError("ent: active term without an unlabeled batch");
        comp["ent"] = with_component_name("ent", [&] {
            return entropy_term(model, batches.unlabeled->x, gs * weights.lambda_ent);
        });
    }
    if (weights.lambda_vat > 0.0) {
        if (!have_unlabeled) throw ConfigError("vat: active term without an unlabeled batch");
        comp["vat"] = with_component_name("vat", [&] {
            const Tensor& x = batches.unlabeled->x;
            if (opts.frozen_vat) return vat_loss_at(model, x, *opts.frozen_vat,
                                                    gs * weights.lambda_vat);
            const VatPerturbation pert =
                compute_vat_perturbation(model, x, config.vat, rng_vat);
            return vat_loss_at(model, x, pert, gs * weights.lambda_vat);
        });
    }

    r.total = weights.lambda_s * comp["sup_source"] + weights.lambda_t * comp["sup_target"] +
              weights.lambda_ssl * comp["ssl"] + weights.lambda_ent * comp["ent"] +
              weights.lambda_vat * comp["vat"];
    if (!std::isfinite(r.total)) throw NumericError("combined objective is non-finite");
    return r;
}

}  // namespace rotadapt
