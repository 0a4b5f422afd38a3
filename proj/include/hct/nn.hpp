#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hct/types.hpp"

namespace hct {

// ---- activation memory accounting ----------------------------------------
// All intermediate network activations are allocated through this allocator;
// the live-byte peak backs the memory-bound tests. Network parameters and
// the primal/dual state are deliberately not tracked.

std::size_t activation_bytes_current();
std::size_t activation_bytes_peak();
void reset_activation_peak();

namespace detail {
void activation_track(std::ptrdiff_t bytes);
}

template <class T>
struct TrackedAllocator {
    using value_type = T;
    TrackedAllocator() = default;
    template <class U>
    TrackedAllocator(const TrackedAllocator<U>&) {}
    T* allocate(std::size_t n) {
        detail::activation_track(std::ptrdiff_t(n * sizeof(T)));
        return static_cast<T*>(::operator new(n * sizeof(T)));
    }
    void deallocate(T* p, std::size_t n) {
        detail::activation_track(-std::ptrdiff_t(n * sizeof(T)));
        ::operator delete(p);
    }
    template <class U>
    bool operator==(const TrackedAllocator<U>&) const { return true; }
};

// Multi-channel dense raster, layout (channel, z, y, x).
struct ChannelRaster {
    int channels = 0, depth = 0, height = 0, width = 0;
    std::vector<double, TrackedAllocator<double>> data;

    ChannelRaster() = default;
    ChannelRaster(int c, int d, int h, int w)
        : channels(c), depth(d), height(h), width(w),
          data(std::size_t(c) * d * h * w, 0.0) {}

    std::size_t spatial_size() const { return std::size_t(depth) * height * width; }
    double* channel(int c) { return data.data() + c * spatial_size(); }
    const double* channel(int c) const { return data.data() + c * spatial_size(); }
    std::size_t size() const { return data.size(); }
};

// ---- convolution layers ---------------------------------------------------

inline constexpr int kKernelSize = 3;  // 3x3x3 kernels, zero padding

struct Conv3dParams {
    int in_channels = 0, out_channels = 0;
    std::vector<double> weights;  // (out, in, kz, ky, kx)
    std::vector<double> bias;     // (out)

    Conv3dParams() = default;
    Conv3dParams(int in_ch, int out_ch)
        : in_channels(in_ch), out_channels(out_ch),
          weights(std::size_t(out_ch) * in_ch * kKernelSize * kKernelSize * kKernelSize, 0.0),
          bias(out_ch, 0.0) {}

    std::size_t num_params() const { return weights.size() + bias.size(); }
};

// Three-layer block: conv -> ReLU -> conv -> ReLU -> conv, same-size
// zero-padded. Hidden widths 32 and 16.
struct ConvBlockParams {
    Conv3dParams layer1;  // in_ch -> 32
    Conv3dParams layer2;  // 32 -> 16
    Conv3dParams layer3;  // 16 -> 1

    ConvBlockParams() = default;
    explicit ConvBlockParams(int in_ch)
        : layer1(in_ch, 32), layer2(32, 16), layer3(16, 1) {}

    int in_channels() const { return layer1.in_channels; }
    std::size_t num_params() const {
        return layer1.num_params() + layer2.num_params() + layer3.num_params();
    }
};

struct ConvBlockGrads {
    ConvBlockParams grads;  // same shapes as the parameters
    explicit ConvBlockGrads(int in_ch) : grads(in_ch) {}
};

// Single conv layer, BLAS-backed (per-slice im2col + gemm).
void conv3d_forward(const Conv3dParams& p, const ChannelRaster& in, ChannelRaster& out,
                    bool relu);
// Serial 6-nested-loop reference, kept for oracle tests and benchmarks.
void conv3d_forward_ref(const Conv3dParams& p, const ChannelRaster& in, ChannelRaster& out,
                        bool relu);

ChannelRaster conv_block_forward(const ConvBlockParams& p, const ChannelRaster& input);

// Hidden post-ReLU activations kept for the backward pass (block-local).
struct ConvBlockActivations {
    ChannelRaster a1, a2;
};

ChannelRaster conv_block_forward(const ConvBlockParams& p, const ChannelRaster& input,
                                 ConvBlockActivations& acts);

// Exact gradients of conv_block_forward. Accumulates parameter gradients
// into grads; returns the gradient w.r.t. the block input.
ChannelRaster conv_block_backward(const ConvBlockParams& p, const ChannelRaster& input,
                                  const ConvBlockActivations& acts,
                                  const ChannelRaster& upstream, ConvBlockParams& grads);

// ---- unrolled network parameters -----------------------------------------

struct NetworkParams {
    int unrolled_iterations = 0;          // M
    std::vector<ConvBlockParams> gamma;   // per-iteration dual blocks, in_ch = 2
    std::vector<ConvBlockParams> lambda;  // per-iteration primal blocks, in_ch = 1
    double op_scale = 1.0;  // fixed 1/||A|| normalization baked into the architecture

    static NetworkParams zero_init(int m);
    // Kaiming-uniform hidden layers, zero-initialized output layers so the
    // initial network is the identity map on (f, u).
    static NetworkParams default_init(int m, std::uint64_t seed);

    NetworkParams zero_like() const;
    std::size_t num_params() const;
    // flat parameter traversal in a fixed order shared with checkpoints
    void for_each(const std::function<void(double&)>& fn);
    void for_each(const std::function<void(const double&)>& fn) const;
};

using GradientTape = NetworkParams;

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
    double lr0 = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int total_steps = 1;
};

struct AdamState {
    std::vector<double> m, v;
};

// lr(t) = lr0 * 0.5 * (1 + cos(pi t / total_steps))
double cosine_lr(const AdamConfig& cfg, int step);

void adam_step(NetworkParams& params, const GradientTape& tape, AdamState& state,
               int step_index, const AdamConfig& cfg);

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     std::uint64_t seed, int step_count);
NetworkParams load_checkpoint(const std::string& path, std::uint64_t* seed = nullptr,
                              int* step_count = nullptr);

}  // namespace hct
