#include "rotadapt/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "rotadapt/errors.hpp"

namespace rotadapt {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatCM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

void check_4d(const Tensor& x, const char* who) {
    if (x.n < 1 || x.c < 1 || x.h < 1 || x.w < 1)
        throw InputError(std::string(who) + ": empty or malformed input tensor");
}

}  // namespace

// ---------------------------------------------------------------- Normalize

Normalize::Normalize(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
    if (mean_.size() != std_.size())
        throw InputError("Normalize: mean/std size mismatch");
    for (double s : std_)
        if (s <= 0.0) throw InputError("Normalize: std must be positive");
}

Tensor Normalize::forward(const Tensor& x, bool) {
    check_4d(x, "Normalize");
    if (static_cast<size_t>(x.c) != mean_.size())
        throw InputError("Normalize: channel count mismatch");
    Tensor y = x;
    const int plane = x.h * x.w;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c) {
            double* p = y.v.data() + (static_cast<size_t>(i) * x.c + c) * plane;
            const double m = mean_[c], inv = 1.0 / std_[c];
            for (int j = 0; j < plane; ++j) p[j] = (p[j] - m) * inv;
        }
    return y;
}

Tensor Normalize::backward(const Tensor& dy, bool) {
    Tensor dx = dy;
    const int plane = dy.h * dy.w;
    for (int i = 0; i < dy.n; ++i)
        for (int c = 0; c < dy.c; ++c) {
            double* p = dx.v.data() + (static_cast<size_t>(i) * dy.c + c) * plane;
            const double inv = 1.0 / std_[c];
            for (int j = 0; j < plane; ++j) p[j] *= inv;
        }
    return dx;
}

// ------------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad)
    : weight(name + ".weight", static_cast<size_t>(out_c) * in_c * kernel * kernel),
      bias(name + ".bias", static_cast<size_t>(out_c)),
      in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad) {
    if (in_c < 1 || out_c < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw InputError("Conv2d: bad constructor arguments");
}

void Conv2d::init(Rng& rng) {
    const double s = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (double& w : weight.w) w = rng.normal() * s;
    std::fill(bias.w.begin(), bias.w.end(), 0.0);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    check_4d(x, "Conv2d");
    if (x.c != in_c_) throw InputError(weight.name + ": input channel mismatch");
    oh_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
    ow_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
    if (oh_ < 1 || ow_ < 1) throw InputError(weight.name + ": input smaller than kernel");
    x_ = x;

    const int K = in_c_ * k_ * k_;
    const int64_t ncols = static_cast<int64_t>(x.n) * oh_ * ow_;
    cols_.assign(static_cast<size_t>(K) * ncols, 0.0);

    // im2col: column (i*oh*ow + oy*ow + ox) holds the receptive field.
    for (int i = 0; i < x.n; ++i)
        for (int oy = 0; oy < oh_; ++oy)
            for (int ox = 0; ox < ow_; ++ox) {
                const int64_t col = (static_cast<int64_t>(i) * oh_ + oy) * ow_ + ox;
                double* dst = cols_.data() + col * K;
                for (int c = 0; c < in_c_; ++c)
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        const double* src =
                            x.v.data() + ((static_cast<size_t>(i) * x.c + c) * x.h + iy) * x.w;
                        double* d = dst + (c * k_ + ky) * k_;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < x.w) d[kx] = src[ix];
                        }
                    }
            }

    Eigen::Map<const MatRM> W(weight.w.data(), out_c_, K);
    Eigen::Map<const MatCM> cols(cols_.data(), K, ncols);
    MatCM out = W * cols;  // out_c x ncols

    Tensor y(x.n, out_c_, oh_, ow_);
    const int plane = oh_ * ow_;
    for (int i = 0; i < x.n; ++i)
        for (int oc = 0; oc < out_c_; ++oc) {
            double* dst = y.v.data() + (static_cast<size_t>(i) * out_c_ + oc) * plane;
            const double b = bias.w[oc];
            for (int j = 0; j < plane; ++j)
                dst[j] = out(oc, static_cast<int64_t>(i) * plane + j) + b;
        }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool accum_param_grads) {
    const int K = in_c_ * k_ * k_;
    const int plane = oh_ * ow_;
    const int64_t ncols = static_cast<int64_t>(x_.n) * plane;

    MatCM dout(out_c_, ncols);
    for (int i = 0; i < dy.n; ++i)
        for (int oc = 0; oc < out_c_; ++oc) {
            const double* src = dy.v.data() + (static_cast<size_t>(i) * out_c_ + oc) * plane;
            for (int j = 0; j < plane; ++j)
                dout(oc, static_cast<int64_t>(i) * plane + j) = src[j];
        }

    Eigen::Map<const MatCM> cols(cols_.data(), K, ncols);
    if (accum_param_grads) {
        Eigen::Map<MatRM> dW(weight.g.data(), out_c_, K);
        dW.noalias() += dout * cols.transpose();
        Eigen::Map<Eigen::VectorXd> db(bias.g.data(), out_c_);
        db.noalias() += dout.rowwise().sum();
    }

    Eigen::Map<const MatRM> W(weight.w.data(), out_c_, K);
    MatCM dcols = W.transpose() * dout;  // K x ncols

    // col2im scatter-add.
    Tensor dx(x_.n, x_.c, x_.h, x_.w);
    for (int i = 0; i < x_.n; ++i)
        for (int oy = 0; oy < oh_; ++oy)
            for (int ox = 0; ox < ow_; ++ox) {
                const int64_t col = (static_cast<int64_t>(i) * oh_ + oy) * ow_ + ox;
                const double* src = dcols.data() + col * K;
                for (int c = 0; c < in_c_; ++c)
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= x_.h) continue;
                        double* dst =
                            dx.v.data() + ((static_cast<size_t>(i) * x_.c + c) * x_.h + iy) * x_.w;
                        const double* s = src + (c * k_ + ky) * k_;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < x_.w) dst[ix] += s[kx];
                        }
                    }
            }
    return dx;
}

// --------------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& x, bool) {
    Tensor y = x;
    mask_.assign(x.v.size(), 0);
    for (size_t i = 0; i < x.v.size(); ++i) {
        if (y.v[i] > 0.0)
            mask_[i] = 1;
        else
            y.v[i] = 0.0;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy, bool) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.v.size(); ++i)
        if (!mask_[i]) dx.v[i] = 0.0;
    return dx;
}

// ---------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride) : k_(kernel), stride_(stride) {
    if (kernel < 1 || stride < 1) throw InputError("MaxPool2d: bad constructor arguments");
}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
    check_4d(x, "MaxPool2d");
    in_n_ = x.n; in_c_ = x.c; in_h_ = x.h; in_w_ = x.w;
    const int oh = (x.h - k_) / stride_ + 1;
    const int ow = (x.w - k_) / stride_ + 1;
    if (oh < 1 || ow < 1) throw InputError("MaxPool2d: input smaller than kernel");

    Tensor y(x.n, x.c, oh, ow);
    argmax_.assign(y.v.size(), 0);
    size_t o = 0;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c) {
            const size_t base = (static_cast<size_t>(i) * x.c + c) * x.h * x.w;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    int64_t best_idx = -1;
                    for (int ky = 0; ky < k_; ++ky)
                        for (int kx = 0; kx < k_; ++kx) {
                            const int iy = oy * stride_ + ky;
                            const int ix = ox * stride_ + kx;
                            const double v = x.v[base + static_cast<size_t>(iy) * x.w + ix];
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int64_t>(base) + static_cast<int64_t>(iy) * x.w + ix;
                            }
                        }
                    y.v[o] = best;
                    argmax_[o] = best_idx;
                }
        }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy, bool) {
    Tensor dx(in_n_, in_c_, in_h_, in_w_);
    for (size_t o = 0; o < dy.v.size(); ++o) dx.v[argmax_[o]] += dy.v[o];
    return dx;
}

// ------------------------------------------------------------ GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    check_4d(x, "GlobalAvgPool");
    in_n_ = x.n; in_c_ = x.c; in_h_ = x.h; in_w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const int plane = x.h * x.w;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c) {
            const double* p = x.v.data() + (static_cast<size_t>(i) * x.c + c) * plane;
            double s = 0.0;
            for (int j = 0; j < plane; ++j) s += p[j];
            y.v[static_cast<size_t>(i) * x.c + c] = s / plane;
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy, bool) {
    Tensor dx(in_n_, in_c_, in_h_, in_w_);
    const int plane = in_h_ * in_w_;
    const double inv = 1.0 / plane;
    for (int i = 0; i < in_n_; ++i)
        for (int c = 0; c < in_c_; ++c) {
            const double g = dy.v[static_cast<size_t>(i) * in_c_ + c] * inv;
            double* p = dx.v.data() + (static_cast<size_t>(i) * in_c_ + c) * plane;
            for (int j = 0; j < plane; ++j) p[j] = g;
        }
    return dx;
}

// ------------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in, int out)
    : weight(name + ".weight", static_cast<size_t>(out) * in),
      bias(name + ".bias", static_cast<size_t>(out)),
      in_(in), out_(out) {
    if (in < 1 || out < 1) throw InputError("Linear: bad constructor arguments");
}

void Linear::init(Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in_));
    for (double& w : weight.w) w = rng.normal() * s;
    std::fill(bias.w.begin(), bias.w.end(), 0.0);
}

void Linear::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor Linear::forward(const Tensor& x, bool) {
    check_4d(x, "Linear");
    if (x.c != in_ || x.h != 1 || x.w != 1)
        throw InputError(weight.name + ": expected Nx" + std::to_string(in_) + "x1x1 input");
    x_ = x;
    Eigen::Map<const MatRM> W(weight.w.data(), out_, in_);
    Eigen::Map<const MatCM> X(x.v.data(), in_, x.n);  // one column per example
    Tensor y(x.n, out_, 1, 1);
    Eigen::Map<MatCM> Y(y.v.data(), out_, x.n);
    Y.noalias() = W * X;
    Eigen::Map<const Eigen::VectorXd> b(bias.w.data(), out_);
    Y.colwise() += b;
    return y;
}

Tensor Linear::backward(const Tensor& dy, bool accum_param_grads) {
    Eigen::Map<const MatCM> dY(dy.v.data(), out_, dy.n);
    Eigen::Map<const MatCM> X(x_.v.data(), in_, x_.n);
    if (accum_param_grads) {
        Eigen::Map<MatRM> dW(weight.g.data(), out_, in_);
        dW.noalias() += dY * X.transpose();
        Eigen::Map<Eigen::VectorXd> db(bias.g.data(), out_);
        db.noalias() += dY.rowwise().sum();
    }
    Eigen::Map<const MatRM> W(weight.w.data(), out_, in_);
    Tensor dx(x_.n, in_, 1, 1);
    Eigen::Map<MatCM> dX(dx.v.data(), in_, x_.n);
    dX.noalias() = W.transpose() * dY;
    return dx;
}

// --------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
}

Tensor Sequential::backward(const Tensor& dy, bool accum_param_grads) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur, accum_param_grads);
    return cur;
}

void Sequential::collect_params(std::vector<Param*>& out) {
    for (auto& l : layers_) l->collect_params(out);
}

}  // namespace rotadapt
