#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rotadapt/tensor.hpp"

namespace rotadapt {

enum class Domain { source, target };

// Single image sample, CHW in [0, 1].
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;

    Image() = default;
    Image(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_), v(static_cast<size_t>(h_) * w_ * c_, 0.0) {}

    double& at(int ch, int y, int x) {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    double at(int ch, int y, int x) const {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    size_t size() const { return v.size(); }
};

struct Example {
    Image image;
    std::optional<int> label;
    Domain domain = Domain::target;
    std::string id;
};

using Pool = std::vector<Example>;

// The five pools of one adaptation experiment.
struct DatasetSplit {
    Pool labeled_source;
    Pool labeled_target;
    Pool unlabeled_target;
    Pool val_target;
    Pool test_target;
};

struct LossWeights {
    double lambda_s = 1.0;
    double lambda_t = 1.0;
    double lambda_ssl = 0.0;
    double lambda_ent = 0.0;
    double lambda_vat = 0.0;

    void validate() const;  // all weights >= 0
};

struct VatParams {
    double epsilon = 2.0;
    double xi = 1e-6;
    int power_iterations = 1;

    void validate() const;
};

enum class PretextKind { rotation, jigsaw };
enum class PretextDomains { target_only, source_and_target };

std::string to_string(PretextKind k);
std::string to_string(PretextDomains d);
PretextKind pretext_kind_from_string(const std::string& s);
PretextDomains pretext_domains_from_string(const std::string& s);

struct TrainConfig {
    LossWeights weights;
    int total_iterations = 30000;
    double lr_trunk = 0.001;
    double lr_heads = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double schedule_alpha = 10.0;
    double schedule_beta = 0.75;
    int batch_source = 32;
    int batch_target = 32;
    int batch_unlabeled = 32;
    int eval_every = 500;
    uint64_t seed = 1;
    PretextKind pretext = PretextKind::rotation;
    PretextDomains pretext_domains = PretextDomains::target_only;
    VatParams vat;
    int jigsaw_grid = 3;
    int jigsaw_perm_count = 30;

    void validate() const;
    uint64_t hash() const;  // stable hash of every field above
};

// Batch drawn from a pool: images plus (possibly empty) integer labels.
struct Batch {
    Tensor x;
    std::vector<int> y;
    bool empty() const { return x.n == 0; }
};

}  // namespace rotadapt
