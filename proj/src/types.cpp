#include "rotadapt/types.hpp"

#include "rotadapt/config_file.hpp"
#include "rotadapt/errors.hpp"

namespace rotadapt {

void LossWeights::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0)) throw ConfigError(std::string("loss weight ") + name +
                                           " must be nonnegative");
    };
    check(lambda_s, "lambda_s");
    check(lambda_t, "lambda_t");
    check(lambda_ssl, "lambda_ssl");
    check(lambda_ent, "lambda_ent");
    check(lambda_vat, "lambda_vat");
}

void VatParams::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("vat_epsilon must be positive");
    if (!(xi > 0.0)) throw ConfigError("vat_xi must be positive");
    if (power_iterations < 1) throw ConfigError("vat_power_iterations must be >= 1");
}

std::string to_string(PretextKind k) {
    return k == PretextKind::rotation ? "rotation" : "jigsaw";
}

std::string to_string(PretextDomains d) {
    return d == PretextDomains::target_only ? "target_only" : "source_and_target";
}

PretextKind pretext_kind_from_string(const std::string& s) {
    if (s == "rotation") return PretextKind::rotation;
    if (s == "jigsaw") return PretextKind::jigsaw;
    throw ConfigError("unknown pretext kind '" + s + "' (expected rotation|jigsaw)");
}

PretextDomains pretext_domains_from_string(const std::string& s) {
    if (s == "target_only") return PretextDomains::target_only;
    if (s == "source_and_target") return PretextDomains::source_and_target;
    throw ConfigError("unknown pretext_domains '" + s +
                      "' (expected target_only|source_and_target)");
}

void TrainConfig::validate() const {
    weights.validate();
    vat.validate();
    if (total_iterations < 0) throw ConfigError("total_iterations must be nonnegative");
    // total_iterations == 0 is the explicit degenerate "evaluate the initial
    // model" run; any real run must reach at least one evaluation point.
    if (total_iterations > 0 && total_iterations < eval_every)
        throw ConfigError("total_iterations must be >= eval_every");
    if (!(lr_trunk > 0.0)) throw ConfigError("lr_trunk must be positive");
    if (!(lr_heads > 0.0)) throw ConfigError("lr_heads must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
    if (!(schedule_alpha >= 0.0)) throw ConfigError("schedule_alpha must be nonnegative");
    if (!(schedule_beta >= 0.0)) throw ConfigError("schedule_beta must be nonnegative");
    if (batch_source < 1 || batch_target < 1 || batch_unlabeled < 1)
        throw ConfigError("batch sizes must be >= 1");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (jigsaw_grid < 1) throw ConfigError("jigsaw_grid must be >= 1");
    if (jigsaw_perm_count < 1) throw ConfigError("jigsaw_perm_count must be >= 1");
}

uint64_t TrainConfig::hash() const {
    return fnv1a64(serialize_config(*this));
}

}  // namespace rotadapt
