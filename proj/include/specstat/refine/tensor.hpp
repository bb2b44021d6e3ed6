#pragma once

#include <cstddef>
#include <vector>

#include "specstat/error.hpp"

namespace specstat::refine {

// Dense CHW tensor. Scalar type is a template parameter: float at runtime,
// double in the finite-difference gradient tests.
template <typename T>
struct Tensor {
    int ch = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int ch_, int h_, int w_)
        : ch(ch_), h(h_), w(w_), data(static_cast<std::size_t>(ch_) * h_ * w_, T(0)) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    T* plane(int c) { return data.data() + static_cast<std::size_t>(c) * plane_size(); }
    const T* plane(int c) const { return data.data() + static_cast<std::size_t>(c) * plane_size(); }

    T at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * h + y) * w + x];
    }
    T& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * h + y) * w + x]; }

    bool same_shape(const Tensor& o) const { return ch == o.ch && h == o.h && w == o.w; }
};

template <typename T>
void add_inplace(Tensor<T>& dst, const Tensor<T>& src) {
    require(dst.same_shape(src), "DimensionMismatch", "tensor addition shape mismatch");
    for (std::size_t i = 0; i < dst.data.size(); ++i)
        dst.data[i] += src.data[i];
}

} // namespace specstat::refine
