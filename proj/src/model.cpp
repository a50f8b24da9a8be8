#include "rotadapt/model.hpp"
#include <algorithm>

#include <json.hpp>

#include "rotadapt/errors.hpp"

namespace rotadapt {

using nlohmann::json;

void ModelSpec::validate() const {
    if (in_h < 1 || in_w < 1 || in_c < 1) throw ConfigError("model: bad input dimensions");
    if (trunk_channels.empty()) throw ConfigError("model: trunk needs at least one block");
    for (int c : trunk_channels)
        if (c < 1) throw ConfigError("model: trunk channel counts must be positive");
    if (num_classes < 1) throw ConfigError("model: num_classes must be positive");
    if (pretext_outputs < 1) throw ConfigError("model: pretext_outputs must be positive");
    if (pretext_hidden < 0) throw ConfigError("model: pretext_hidden must be nonnegative");
    if (input_mean.size() != static_cast<size_t>(in_c) ||
        input_std.size() != static_cast<size_t>(in_c))
        throw ConfigError("model: input mean/std must have one entry per channel");
    int h = in_h, w = in_w;
    for (size_t i = 0; i < trunk_channels.size(); ++i) {
        h /= 2;
        w /= 2;
    }
    if (h < 1 || w < 1) throw ConfigError("model: input too small for trunk depth");
}

std::string ModelSpec::to_json() const {
    json j;
    j["arch"] = arch;
    j["in_h"] = in_h;
    j["in_w"] = in_w;
    j["in_c"] = in_c;
    j["trunk_channels"] = trunk_channels;
    j["num_classes"] = num_classes;
    j["pretext_outputs"] = pretext_outputs;
    j["pretext_two_layer"] = pretext_two_layer;
    j["pretext_hidden"] = pretext_hidden;
    j["input_mean"] = input_mean;
    j["input_std"] = input_std;
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        ModelSpec s;
        s.arch = j.at("arch").get<std::string>();
        s.in_h = j.at("in_h").get<int>();
        s.in_w = j.at("in_w").get<int>();
        s.in_c = j.at("in_c").get<int>();
        s.trunk_channels = j.at("trunk_channels").get<std::vector<int>>();
        s.num_classes = j.at("num_classes").get<int>();
        s.pretext_outputs = j.at("pretext_outputs").get<int>();
        s.pretext_two_layer = j.at("pretext_two_layer").get<bool>();
        s.pretext_hidden = j.at("pretext_hidden").get<int>();
        s.input_mean = j.at("input_mean").get<std::vector<double>>();
        s.input_std = j.at("input_std").get<std::vector<double>>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw DataError(std::string("model spec: malformed JSON: ") + e.what());
    }
}

Model::Model(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    build();
}

Model::Model(const Model& other) : spec_(other.spec_), training_(other.training_) {
    build();
    set_flat_weights(other.flat_weights());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        spec_ = other.spec_;
        training_ = other.training_;
        build();
        set_flat_weights(other.flat_weights());
    }
    return *this;
}

void Model::build() {
    trunk_ = std::make_unique<Sequential>();
    trunk_->add(std::make_unique<Normalize>(spec_.input_mean, spec_.input_std));
    int in_c = spec_.in_c;
    for (size_t i = 0; i < spec_.trunk_channels.size(); ++i) {
        const int out_c = spec_.trunk_channels[i];
        trunk_->add(std::make_unique<Conv2d>("trunk.conv" + std::to_string(i + 1), in_c, out_c,
                                             3, 1, 1));
        trunk_->add(std::make_unique<ReLU>());
        trunk_->add(std::make_unique<MaxPool2d>(2, 2));
        in_c = out_c;
    }
    trunk_->add(std::make_unique<GlobalAvgPool>());

    const int d = spec_.feature_dim();
    class_head_ = std::make_unique<Sequential>();
    class_head_->add(std::make_unique<Linear>("class_head.fc", d, spec_.num_classes));

    pretext_head_ = std::make_unique<Sequential>();
    if (spec_.pretext_two_layer) {
        const int hidden = spec_.pretext_hidden > 0 ? spec_.pretext_hidden : d;
        pretext_head_->add(std::make_unique<Linear>("pretext_head.fc1", d, hidden));
        pretext_head_->add(std::make_unique<ReLU>());
        pretext_head_->add(std::make_unique<Linear>("pretext_head.fc2", hidden,
                                                    spec_.pretext_outputs));
    } else {
        pretext_head_->add(std::make_unique<Linear>("pretext_head.fc", d,
                                                    spec_.pretext_outputs));
    }
}

void Model::init_params(Rng& rng) {
    auto init_seq = [&rng](Sequential& s) {
        for (size_t i = 0; i < s.size(); ++i) {
            if (auto* conv = dynamic_cast<Conv2d*>(&s.at(i))) conv->init(rng);
            if (auto* fc = dynamic_cast<Linear*>(&s.at(i))) fc->init(rng);
        }
    };
    // The final layer of each head starts at zero so iteration-1 logits are
    // exactly zero: the first loss sits at the uniform-prediction value.
    auto zero_last_linear = [](Sequential& s) {
        for (size_t i = s.size(); i-- > 0;) {
            if (auto* fc = dynamic_cast<Linear*>(&s.at(i))) {
                std::fill(fc->weight.w.begin(), fc->weight.w.end(), 0.0);
                std::fill(fc->bias.w.begin(), fc->bias.w.end(), 0.0);
                return;
            }
        }
    };
    init_seq(*trunk_);
    init_seq(*class_head_);
    init_seq(*pretext_head_);
    zero_last_linear(*class_head_);
    zero_last_linear(*pretext_head_);
}

void Model::check_input(const Tensor& batch) const {
    if (batch.n < 1) throw InputError("model: empty batch");
    if (batch.c != spec_.in_c || batch.h != spec_.in_h || batch.w != spec_.in_w)
        throw InputError("model: input shape " + std::to_string(batch.c) + "x" +
                         std::to_string(batch.h) + "x" + std::to_string(batch.w) +
                         " does not match configured " + std::to_string(spec_.in_c) + "x" +
                         std::to_string(spec_.in_h) + "x" + std::to_string(spec_.in_w));
}

Tensor Model::forward_class(const Tensor& batch) {
    check_input(batch);
    Tensor logits = class_head_->forward(trunk_->forward(batch, training_), training_);
    if (!all_finite(logits)) throw NumericError("forward_class: non-finite logits");
    return logits;
}

Tensor Model::forward_pretext(const Tensor& batch) {
    check_input(batch);
    Tensor logits = pretext_head_->forward(trunk_->forward(batch, training_), training_);
    if (!all_finite(logits)) throw NumericError("forward_pretext: non-finite logits");
    return logits;
}

Tensor Model::backward_class(const Tensor& dlogits, bool accum_param_grads) {
    return trunk_->backward(class_head_->backward(dlogits, accum_param_grads),
                            accum_param_grads);
}

Tensor Model::backward_pretext(const Tensor& dlogits, bool accum_param_grads) {
    return trunk_->backward(pretext_head_->backward(dlogits, accum_param_grads),
                            accum_param_grads);
}

std::vector<Param*> Model::params() {
    std::vector<Param*> out;
    trunk_->collect_params(out);
    class_head_->collect_params(out);
    pretext_head_->collect_params(out);
    return out;
}

std::vector<Param*> Model::trunk_params() {
    std::vector<Param*> out;
    trunk_->collect_params(out);
    return out;
}

std::vector<Param*> Model::head_params() {
    std::vector<Param*> out;
    class_head_->collect_params(out);
    pretext_head_->collect_params(out);
    return out;
}

void Model::zero_grad() {
    for (Param* p : params()) p->zero_grad();
}

size_t Model::weight_count() const {
    size_t n = 0;
    for (Param* p : const_cast<Model*>(this)->params()) n += p->w.size();
    return n;
}

std::vector<double> Model::flat_weights() const {
    std::vector<double> out;
    out.reserve(weight_count());
    for (Param* p : const_cast<Model*>(this)->params())
        out.insert(out.end(), p->w.begin(), p->w.end());
    return out;
}

void Model::set_flat_weights(const std::vector<double>& w) {
    if (w.size() != weight_count())
        throw InputError("model: weight vector size " + std::to_string(w.size()) +
                         " does not match parameter count " + std::to_string(weight_count()));
    size_t off = 0;
    for (Param* p : params()) {
        std::copy(w.begin() + off, w.begin() + off + p->w.size(), p->w.begin());
        off += p->w.size();
    }
}

const std::vector<ArchEntry>& arch_registry() {
    static const std::vector<ArchEntry> entries = {
        {"tiny", false},     {"small", false},    {"large", false},
        {"alexnet", true},   {"resnet34", true},  {"resnet101", true},
    };
    return entries;
}

ModelSpec desk_model_spec(const std::string& arch, int num_classes, int pretext_outputs) {
    const ArchEntry* entry = nullptr;
    for (const auto& e : arch_registry())
        if (e.name == arch) entry = &e;
    if (!entry) throw ConfigError("unknown architecture '" + arch + "'");
    if (entry->needs_pretrained)
        throw ConfigError("architecture '" + arch +
                          "' requires a configured pretrained-weights provider");
    ModelSpec spec;
    spec.arch = arch;
    if (arch == "tiny")
        spec.trunk_channels = {6, 12};
    else if (arch == "small")
        spec.trunk_channels = {8, 16, 32};
    else
        spec.trunk_channels = {16, 32, 64};
    spec.num_classes = num_classes;
    spec.pretext_outputs = pretext_outputs;
    return spec;
}

Model make_model(const std::string& arch, int num_classes, int pretext_outputs, Rng& rng,
                 PretrainedProvider* provider, bool pretext_two_layer) {
    const ArchEntry* entry = nullptr;
    for (const auto& e : arch_registry())
        if (e.name == arch) entry = &e;
    if (!entry) throw ConfigError("unknown architecture '" + arch + "'");
    if (entry->needs_pretrained) {
        if (!provider)
            throw ConfigError("architecture '" + arch +
                              "' requires a configured pretrained-weights provider");
        return provider->build(arch, num_classes, pretext_outputs, rng);
    }
    ModelSpec spec = desk_model_spec(arch, num_classes, pretext_outputs);
    spec.pretext_two_layer = pretext_two_layer;
    Model m(spec);
    m.init_params(rng);
    return m;
}

}  // namespace rotadapt
