#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "specstat/core/types.hpp"
#include "specstat/parallel.hpp"
#include "specstat/refine/input.hpp"
#include "specstat/refine/tensor.hpp"
#include "specstat/rng.hpp"

namespace specstat::refine {

// 2-D convolution, kernel k x k with pad k/2, stride 1 or 2. All loops write
// each output element exactly once per (plane, position), so the OpenMP and
// serial paths agree bitwise.
template <typename T>
struct Conv {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 3;
    int stride = 1;
    std::vector<T> w;  // [oc][ic][ky][kx]
    std::vector<T> b;  // [oc]
    std::vector<T> gw; // gradient accumulators, same layout
    std::vector<T> gb;

    void build(int in_channels, int out_channels, int kernel, int stride_, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        ksize = kernel;
        stride = stride_;
        w.resize(static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize);
        const double scale = std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
        for (auto& v : w)
            v = static_cast<T>(rng.normal() * scale); // He initialization
        b.assign(static_cast<std::size_t>(out_ch), T(0));
        gw.assign(w.size(), T(0));
        gb.assign(b.size(), T(0));
    }

    int out_dim(int in) const { return (in + 2 * (ksize / 2) - ksize) / stride + 1; }
    std::size_t param_count() const { return w.size() + b.size(); }

    void zero_grad() {
        std::fill(gw.begin(), gw.end(), T(0));
        std::fill(gb.begin(), gb.end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, Exec exec = Exec::Parallel) const {
        require(x.ch == in_ch, "DimensionMismatch", "conv input channel mismatch");
        const int pad = ksize / 2;
        Tensor<T> y(out_ch, out_dim(x.h), out_dim(x.w));
        parallel_for(
            out_ch,
            [&](std::int64_t oc) {
                T* out = y.plane(static_cast<int>(oc));
                for (std::size_t i = 0; i < y.plane_size(); ++i)
                    out[i] = b[static_cast<std::size_t>(oc)];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const T* in = x.plane(ic);
                    for (int ky = 0; ky < ksize; ++ky) {
                        for (int kx = 0; kx < ksize; ++kx) {
                            const T wv = w[((static_cast<std::size_t>(oc) * in_ch + ic) * ksize + ky) * ksize + kx];
                            int ox0 = 0;
                            while (ox0 * stride + kx - pad < 0)
                                ++ox0;
                            int ox1 = y.w;
                            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= x.w)
                                --ox1;
                            for (int oy = 0; oy < y.h; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= x.h)
                                    continue;
                                const T* in_row = in + static_cast<std::size_t>(iy) * x.w + (ox0 * stride + kx - pad);
                                T* out_row = out + static_cast<std::size_t>(oy) * y.w + ox0;
                                const int n = ox1 - ox0;
                                if (stride == 1) {
                                    for (int i = 0; i < n; ++i)
                                        out_row[i] += wv * in_row[i];
                                } else {
                                    for (int i = 0; i < n; ++i)
                                        out_row[i] += wv * in_row[static_cast<std::size_t>(i) * stride];
                                }
                            }
                        }
                    }
                }
            },
            exec);
        return y;
    }

    // Accumulates gw/gb and returns dL/dx. x must be the tensor given to the
    // matching forward call.
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, Exec exec = Exec::Parallel) {
        const int pad = ksize / 2;
        Tensor<T> dx(x.ch, x.h, x.w);

        parallel_for(
            in_ch,
            [&](std::int64_t ic) {
                T* dxp = dx.plane(static_cast<int>(ic));
                for (int oc = 0; oc < out_ch; ++oc) {
                    const T* dyp = dy.plane(oc);
                    for (int ky = 0; ky < ksize; ++ky) {
                        for (int kx = 0; kx < ksize; ++kx) {
                            const T wv = w[((static_cast<std::size_t>(oc) * in_ch + ic) * ksize + ky) * ksize + kx];
                            int ox0 = 0;
                            while (ox0 * stride + kx - pad < 0)
                                ++ox0;
                            int ox1 = dy.w;
                            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= x.w)
                                --ox1;
                            for (int oy = 0; oy < dy.h; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= x.h)
                                    continue;
                                T* dx_row = dxp + static_cast<std::size_t>(iy) * x.w + (ox0 * stride + kx - pad);
                                const T* dy_row = dyp + static_cast<std::size_t>(oy) * dy.w + ox0;
                                const int n = ox1 - ox0;
                                if (stride == 1) {
                                    for (int i = 0; i < n; ++i)
                                        dx_row[i] += wv * dy_row[i];
                                } else {
                                    for (int i = 0; i < n; ++i)
                                        dx_row[static_cast<std::size_t>(i) * stride] += wv * dy_row[i];
                                }
                            }
                        }
                    }
                }
            },
            exec);

        parallel_for(
            out_ch,
            [&](std::int64_t oc) {
                const T* dyp = dy.plane(static_cast<int>(oc));
                T bias_acc = T(0);
                for (std::size_t i = 0; i < dy.plane_size(); ++i)
                    bias_acc += dyp[i];
                gb[static_cast<std::size_t>(oc)] += bias_acc;
                for (int ic = 0; ic < in_ch; ++ic) {
                    const T* in = x.plane(ic);
                    for (int ky = 0; ky < ksize; ++ky) {
                        for (int kx = 0; kx < ksize; ++kx) {
                            int ox0 = 0;
                            while (ox0 * stride + kx - pad < 0)
                                ++ox0;
                            int ox1 = dy.w;
                            while (ox1 > ox0 && (ox1 - 1) * stride + kx - pad >= x.w)
                                --ox1;
                            T acc = T(0);
                            for (int oy = 0; oy < dy.h; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= x.h)
                                    continue;
                                const T* in_row = in + static_cast<std::size_t>(iy) * x.w + (ox0 * stride + kx - pad);
                                const T* dy_row = dyp + static_cast<std::size_t>(oy) * dy.w + ox0;
                                const int n = ox1 - ox0;
                                if (stride == 1) {
                                    for (int i = 0; i < n; ++i)
                                        acc += dy_row[i] * in_row[i];
                                } else {
                                    for (int i = 0; i < n; ++i)
                                        acc += dy_row[i] * in_row[static_cast<std::size_t>(i) * stride];
                                }
                            }
                            gw[((static_cast<std::size_t>(oc) * in_ch + ic) * ksize + ky) * ksize + kx] += acc;
                        }
                    }
                }
            },
            exec);
        return dx;
    }
};

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data)
        v = v > T(0) ? v : T(0);
    return y;
}

// mask by the cached post-activation: y > 0 iff the pre-activation was > 0
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] = y.data[i] > T(0) ? dx.data[i] : T(0);
    return dx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (auto& v : y.data)
        v = T(1) / (T(1) + std::exp(-v));
    return y;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
    Tensor<T> y(x.ch, 2 * x.h, 2 * x.w);
    for (int c = 0; c < x.ch; ++c) {
        const T* in = x.plane(c);
        T* out = y.plane(c);
        for (int oy = 0; oy < y.h; ++oy) {
            const T* in_row = in + static_cast<std::size_t>(oy / 2) * x.w;
            T* out_row = out + static_cast<std::size_t>(oy) * y.w;
            for (int ox = 0; ox < y.w; ++ox)
                out_row[ox] = in_row[ox / 2];
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample2_backward(int in_h, int in_w, const Tensor<T>& dy) {
    Tensor<T> dx(dy.ch, in_h, in_w);
    for (int c = 0; c < dy.ch; ++c) {
        const T* g = dy.plane(c);
        T* out = dx.plane(c);
        for (int oy = 0; oy < dy.h; ++oy)
            for (int ox = 0; ox < dy.w; ++ox)
                out[static_cast<std::size_t>(oy / 2) * in_w + ox / 2] +=
                    g[static_cast<std::size_t>(oy) * dy.w + ox];
    }
    return dx;
}

// top-left crop, used to align upsampled tensors with odd-sized skip tensors
template <typename T>
Tensor<T> crop_to(const Tensor<T>& x, int h, int w) {
    require(h <= x.h && w <= x.w, "DimensionMismatch", "crop target larger than input");
    if (h == x.h && w == x.w)
        return x;
    Tensor<T> y(x.ch, h, w);
    for (int c = 0; c < x.ch; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                y.at(c, yy, xx) = x.at(c, yy, xx);
    return y;
}

template <typename T>
Tensor<T> crop_backward(const Tensor<T>& dy, int h, int w) {
    if (h == dy.h && w == dy.w)
        return dy;
    Tensor<T> dx(dy.ch, h, w); // zero-padded back to the pre-crop shape
    for (int c = 0; c < dy.ch; ++c)
        for (int yy = 0; yy < dy.h; ++yy)
            for (int xx = 0; xx < dy.w; ++xx)
                dx.at(c, yy, xx) = dy.at(c, yy, xx);
    return dx;
}

// Two 3x3 convolutions with an identity shortcut: y = relu(x + c2(relu(c1(x)))).
template <typename T>
struct ResBlock {
    Conv<T> c1, c2;
    Tensor<T> x_, a_, y_; // forward caches

    void build(int channels, Rng& rng) {
        c1.build(channels, channels, 3, 1, rng);
        c2.build(channels, channels, 3, 1, rng);
    }

    Tensor<T> forward(const Tensor<T>& x, Exec exec = Exec::Parallel) {
        x_ = x;
        a_ = relu(c1.forward(x, exec));
        Tensor<T> z = c2.forward(a_, exec);
        require(z.same_shape(x), "DimensionMismatch", "residual block must preserve shape");
        add_inplace(z, x);
        y_ = relu(z);
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy, Exec exec = Exec::Parallel) {
        Tensor<T> dz = relu_backward(y_, dy);
        Tensor<T> da = relu_backward(a_, c2.backward(a_, dz, exec));
        Tensor<T> dx = c1.backward(x_, da, exec);
        add_inplace(dx, dz);
        return dx;
    }
};

// Residual encoder-decoder with three levels, nearest-neighbor upsampling with
// additive skip connections, and a 3-channel logistic head. Spatial dimensions
// of the output equal the input (odd sizes are handled by cropping the
// upsampled tensor to the skip tensor's shape).
template <typename T>
struct ResUNet {
    int in_ch = 1;
    std::array<int, 3> chans{16, 32, 64};

    Conv<T> stem;
    ResBlock<T> enc0;
    Conv<T> down1;
    ResBlock<T> enc1;
    Conv<T> down2;
    ResBlock<T> enc2;
    Conv<T> up1;
    ResBlock<T> dec1;
    Conv<T> up0;
    ResBlock<T> dec0;
    Conv<T> head;

    // forward caches
    Tensor<T> x_in_, x0_, e0_, d1_, e1_, d2_, u1u_, u1a_, u0u_, u0a_, probs_;

    void build(int in_channels, std::array<int, 3> channels, std::uint64_t seed) {
        in_ch = in_channels;
        chans = channels;
        Rng rng(seed);
        stem.build(in_ch, chans[0], 3, 1, rng);
        enc0.build(chans[0], rng);
        down1.build(chans[0], chans[1], 3, 2, rng);
        enc1.build(chans[1], rng);
        down2.build(chans[1], chans[2], 3, 2, rng);
        enc2.build(chans[2], rng);
        up1.build(chans[2], chans[1], 3, 1, rng);
        dec1.build(chans[1], rng);
        up0.build(chans[1], chans[0], 3, 1, rng);
        dec0.build(chans[0], rng);
        head.build(chans[0], 3, 1, 1, rng);
    }

    std::vector<std::pair<std::string, Conv<T>*>> named_convs() {
        return {{"stem", &stem},       {"enc0.c1", &enc0.c1}, {"enc0.c2", &enc0.c2},
                {"down1", &down1},     {"enc1.c1", &enc1.c1}, {"enc1.c2", &enc1.c2},
                {"down2", &down2},     {"enc2.c1", &enc2.c1}, {"enc2.c2", &enc2.c2},
                {"up1", &up1},         {"dec1.c1", &dec1.c1}, {"dec1.c2", &dec1.c2},
                {"up0", &up0},         {"dec0.c1", &dec0.c1}, {"dec0.c2", &dec0.c2},
                {"head", &head}};
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (auto& [name, conv] : named_convs())
            n += conv->param_count();
        return n;
    }

    void zero_grad() {
        for (auto& [name, conv] : named_convs())
            conv->zero_grad();
    }

    Tensor<T> forward(const Tensor<T>& x, Exec exec = Exec::Parallel) {
        require(x.ch == in_ch, "DimensionMismatch", "network input channel mismatch");
        x_in_ = x;
        x0_ = relu(stem.forward(x, exec));
        e0_ = enc0.forward(x0_, exec);
        d1_ = relu(down1.forward(e0_, exec));
        e1_ = enc1.forward(d1_, exec);
        d2_ = relu(down2.forward(e1_, exec));
        Tensor<T> e2 = enc2.forward(d2_, exec);

        u1u_ = upsample2(e2);
        u1a_ = relu(up1.forward(u1u_, exec));
        Tensor<T> s1 = crop_to(u1a_, e1_.h, e1_.w);
        add_inplace(s1, e1_);
        Tensor<T> r1 = dec1.forward(s1, exec);

        u0u_ = upsample2(r1);
        u0a_ = relu(up0.forward(u0u_, exec));
        Tensor<T> s0 = crop_to(u0a_, e0_.h, e0_.w);
        add_inplace(s0, e0_);
        Tensor<T> r0 = dec0.forward(s0, exec);

        Tensor<T> logits = head.forward(r0, exec);
        require(logits.h == x.h && logits.w == x.w && logits.ch == 3, "DimensionMismatch",
                "network output must be 3 channels at input resolution");
        probs_ = sigmoid(logits);
        return probs_;
    }

    Tensor<T> backward(const Tensor<T>& dprobs, Exec exec = Exec::Parallel) {
        // through the logistic head
        Tensor<T> dlogits = dprobs;
        for (std::size_t i = 0; i < dlogits.data.size(); ++i) {
            const T p = probs_.data[i];
            dlogits.data[i] *= p * (T(1) - p);
        }
        Tensor<T> dr0 = head.backward(dec0.y_, dlogits, exec);
        Tensor<T> ds0 = dec0.backward(dr0, exec);

        Tensor<T> de0 = ds0; // skip branch
        Tensor<T> du0a = crop_backward(ds0, u0a_.h, u0a_.w);
        Tensor<T> du0u = up0.backward(u0u_, relu_backward(u0a_, du0a), exec);
        Tensor<T> dr1 = upsample2_backward(dec1.y_.h, dec1.y_.w, du0u);
        Tensor<T> ds1 = dec1.backward(dr1, exec);

        Tensor<T> de1 = ds1; // skip branch
        Tensor<T> du1a = crop_backward(ds1, u1a_.h, u1a_.w);
        Tensor<T> du1u = up1.backward(u1u_, relu_backward(u1a_, du1a), exec);
        Tensor<T> de2 = upsample2_backward(enc2.y_.h, enc2.y_.w, du1u);

        Tensor<T> dd2 = enc2.backward(de2, exec);
        add_inplace(de1, down2.backward(e1_, relu_backward(d2_, dd2), exec));
        Tensor<T> dd1 = enc1.backward(de1, exec);
        add_inplace(de0, down1.backward(e0_, relu_backward(d1_, dd1), exec));
        Tensor<T> dx0 = enc0.backward(de0, exec);
        return stem.backward(x_in_, relu_backward(x0_, dx0), exec);
    }
};

// Soft Dice summed over the 3 channels with smoothing 1; loss lies in [0, 3].
template <typename T>
struct DiceLoss {
    double value = 0.0;
    Tensor<T> grad;
};

template <typename T>
DiceLoss<T> soft_dice_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    require(pred.same_shape(target), "DimensionMismatch", "prediction/target shape mismatch");
    require(pred.ch == 3, "DimensionMismatch", "soft dice expects 3 channels");
    constexpr double kSmooth = 1.0;
    DiceLoss<T> out;
    out.grad = Tensor<T>(pred.ch, pred.h, pred.w);
    for (int c = 0; c < pred.ch; ++c) {
        const T* p = pred.plane(c);
        const T* t = target.plane(c);
        double sum_pt = 0.0, sum_p = 0.0, sum_t = 0.0;
        for (std::size_t i = 0; i < pred.plane_size(); ++i) {
            sum_pt += static_cast<double>(p[i]) * static_cast<double>(t[i]);
            sum_p += p[i];
            sum_t += t[i];
        }
        const double denom = sum_p + sum_t + kSmooth;
        const double numer = 2.0 * sum_pt + kSmooth;
        out.value += 1.0 - numer / denom;
        T* g = out.grad.plane(c);
        for (std::size_t i = 0; i < pred.plane_size(); ++i)
            g[i] = static_cast<T>(-(2.0 * t[i] * denom - numer) / (denom * denom));
    }
    return out;
}

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct TrainSpec {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 4;
    int epochs = 40;
    std::uint64_t seed = 0;
};

struct Model {
    InputConfig config = InputConfig::A;
    std::array<int, 3> channels{16, 32, 64};
    ChannelStats norm;
    ResUNet<float> net;

    std::size_t parameter_count() { return net.param_count(); }
};

struct TrainSample {
    Tensor<float> input;  // raw channels from assemble_input
    Tensor<float> target; // 3-channel 0/1
};

struct TrainResult {
    Model model;
    std::vector<double> loss_history; // mean loss per epoch
};

ChannelStats compute_channel_stats(const std::vector<TrainSample>& dataset);
void normalize(Tensor<float>& input, const ChannelStats& stats);

// Deterministic per seed: fixed data order, fixed init, sequential batches,
// Adam updates after each batch. Throws Divergence when the loss goes
// non-finite.
TrainResult train(InputConfig config, const TrainSpec& spec, std::vector<TrainSample> dataset,
                  std::array<int, 3> channels = {16, 32, 64});

Tensor<float> infer(Model& model, const Tensor<float>& raw_input);

std::vector<core::LabelMap> binarize(const Tensor<float>& probs, double threshold = 0.5);

// Model file: one-line JSON header (config, channels, normalization statistics,
// tensor directory with byte offsets) + '\n' + raw little-endian float32
// payload. Round trips bit-exactly.
void save_model(Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

} // namespace specstat::refine
