#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rotadapt/nn.hpp"
#include "rotadapt/rng.hpp"
#include "rotadapt/tensor.hpp"

namespace rotadapt {

struct ModelSpec {
    std::string arch = "small";
    int in_h = 32, in_w = 32, in_c = 3;
    std::vector<int> trunk_channels = {8, 16, 32};
    int num_classes = 8;
    int pretext_outputs = 4;
    bool pretext_two_layer = false;
    int pretext_hidden = 0;  // 0 means feature_dim()
    std::vector<double> input_mean = {0.5, 0.5, 0.5};
    std::vector<double> input_std = {0.5, 0.5, 0.5};

    int feature_dim() const { return trunk_channels.empty() ? 0 : trunk_channels.back(); }
    void validate() const;
    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
    bool operator==(const ModelSpec&) const = default;
};

// Shared trunk feeding a class head (C logits) and a pretext head (P logits).
// Not safe for concurrent mutation; eval-mode reads may be shared.
class Model {
public:
    explicit Model(const ModelSpec& spec);
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    void init_params(Rng& rng);

    void set_train(bool train) { training_ = train; }
    bool is_training() const { return training_; }

    Tensor forward_class(const Tensor& batch);
    Tensor forward_pretext(const Tensor& batch);
    // Backward through the matching forward; returns d(loss)/d(input batch).
    Tensor backward_class(const Tensor& dlogits, bool accum_param_grads = true);
    Tensor backward_pretext(const Tensor& dlogits, bool accum_param_grads = true);

    const ModelSpec& spec() const { return spec_; }
    std::vector<Param*> params();
    std::vector<Param*> trunk_params();
    std::vector<Param*> head_params();  // both heads
    void zero_grad();

    size_t weight_count() const;
    std::vector<double> flat_weights() const;
    void set_flat_weights(const std::vector<double>& w);

private:
    void build();
    void check_input(const Tensor& batch) const;

    ModelSpec spec_;
    std::unique_ptr<Sequential> trunk_, class_head_, pretext_head_;
    bool training_ = true;
};

// Builds `arch` with pretrained trunk weights; heads sized per spec and
// freshly initialized from rng.
class PretrainedProvider {
public:
    virtual ~PretrainedProvider() = default;
    virtual Model build(const std::string& arch, int num_classes, int pretext_outputs,
                        Rng& rng) = 0;
};

struct ArchEntry {
    std::string name;
    bool needs_pretrained;  // full-scale backbones are only usable via a provider
};

const std::vector<ArchEntry>& arch_registry();

// Registry spec for a desk-scale arch; provider-gated archs are rejected.
ModelSpec desk_model_spec(const std::string& arch, int num_classes, int pretext_outputs);

// Instantiates a registry architecture. Seeded random init for desk-scale
// archs; full-scale entries (alexnet, resnet34, resnet101) require a provider.
Model make_model(const std::string& arch, int num_classes, int pretext_outputs, Rng& rng,
                 PretrainedProvider* provider = nullptr, bool pretext_two_layer = false);

}  // namespace rotadapt
