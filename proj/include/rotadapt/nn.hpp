#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rotadapt/rng.hpp"
#include "rotadapt/tensor.hpp"

namespace rotadapt {

struct Param {
    std::string name;
    std::vector<double> w;  // values
    std::vector<double> g;  // gradient accumulator, same length as w

    Param() = default;
    Param(std::string n, size_t size) : name(std::move(n)), w(size, 0.0), g(size, 0.0) {}
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

// A layer caches its most recent forward pass; backward(dy, ...) must follow
// the forward it differentiates.  backward returns d(loss)/d(input) and, when
// accum_param_grads is set, adds d(loss)/d(param) into each Param::g (it never
// touches Param::g otherwise, which lets VAT's power iteration obtain input
// gradients without polluting the optimizer's view).
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy, bool accum_param_grads) = 0;
    virtual void collect_params(std::vector<Param*>&) {}
};

// Fixed per-channel (x - mean) / std; not learned.
class Normalize final : public Layer {
public:
    Normalize(std::vector<double> mean, std::vector<double> std);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;

private:
    std::vector<double> mean_, std_;
};

class Conv2d final : public Layer {
public:
    Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;
    void collect_params(std::vector<Param*>& out) override;
    void init(Rng& rng);  // He-normal weights, zero bias

    Param weight;  // [out_c][in_c*k*k], row-major
    Param bias;    // [out_c]

private:
    int in_c_, out_c_, k_, stride_, pad_;
    Tensor x_;                  // cached input
    std::vector<double> cols_;  // cached im2col matrix, K x (n*oh*ow), col-major
    int oh_ = 0, ow_ = 0;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;

private:
    std::vector<char> mask_;
};

class MaxPool2d final : public Layer {
public:
    MaxPool2d(int kernel, int stride);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;

private:
    int k_, stride_;
    std::vector<int64_t> argmax_;  // flat index into the input buffer
    int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;

private:
    int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

// Dense map on feature tensors (h = w = 1, features along the channel axis).
class Linear final : public Layer {
public:
    Linear(std::string name, int in, int out);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;
    void collect_params(std::vector<Param*>& out) override;
    void init(Rng& rng);  // normal(0, 1/sqrt(in)) weights, zero bias

    Param weight;  // [out][in], row-major
    Param bias;    // [out]

private:
    int in_, out_;
    Tensor x_;
};

class Sequential final : public Layer {
public:
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy, bool accum_param_grads) override;
    void collect_params(std::vector<Param*>& out) override;
    size_t size() const { return layers_.size(); }
    Layer& at(size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace rotadapt
