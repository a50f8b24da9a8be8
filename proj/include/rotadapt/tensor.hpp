#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace rotadapt {

// Dense N x C x H x W tensor of doubles, contiguous row-major.
// Feature vectors and logits use H = W = 1.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    size_t size() const { return v.size(); }
    size_t per_image() const { return static_cast<size_t>(c) * h * w; }

    double* image(int i) { return v.data() + static_cast<size_t>(i) * per_image(); }
    const double* image(int i) const { return v.data() + static_cast<size_t>(i) * per_image(); }

    double& at(int i, int ch, int y, int x) {
        return v[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }
    const double& at(int i, int ch, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }

    // Copy of image i as an n=1 tensor.
    Tensor slice(int i) const {
        Tensor t(1, c, h, w);
        const double* src = image(i);
        std::copy(src, src + per_image(), t.v.begin());
        return t;
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

bool all_finite(const Tensor& t);
bool all_finite(const std::vector<double>& v);

}  // namespace rotadapt
