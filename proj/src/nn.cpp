#include "hct/nn.hpp"

#include <cblas.h>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hct/parallel.hpp"
#include "hct/rng.hpp"

namespace hct {

// ---- activation accounting ------------------------------------------------

namespace {
std::atomic<std::ptrdiff_t> g_act_current{0};
std::atomic<std::ptrdiff_t> g_act_peak{0};
}

namespace detail {
void activation_track(std::ptrdiff_t bytes) {
    const std::ptrdiff_t now = g_act_current.fetch_add(bytes) + bytes;
    std::ptrdiff_t peak = g_act_peak.load();
    while (now > peak && !g_act_peak.compare_exchange_weak(peak, now)) {
    }
}
}  // namespace detail

std::size_t activation_bytes_current() { return std::size_t(std::max<std::ptrdiff_t>(0, g_act_current.load())); }
std::size_t activation_bytes_peak() { return std::size_t(std::max<std::ptrdiff_t>(0, g_act_peak.load())); }
void reset_activation_peak() { g_act_peak.store(g_act_current.load()); }

// ---- convolution ----------------------------------------------------------

namespace {

using TrackedVec = std::vector<double, TrackedAllocator<double>>;

constexpr int K = kKernelSize;
constexpr int KH = K / 2;

// Gathers the im2col matrix for one output slice: row ((ic*K+kz)*K+ky)*K+kx,
// column y*w + x, zero-filled outside the input.
void fill_col(const ChannelRaster& in, int z, double* col) {
    const int h = in.height, w = in.width, d = in.depth;
    const std::size_t npos = std::size_t(h) * w;
    std::size_t row = 0;
    for (int ic = 0; ic < in.channels; ++ic) {
        const double* ch = in.channel(ic);
        for (int kz = 0; kz < K; ++kz) {
            const int iz = z + kz - KH;
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx, ++row) {
                    double* dst = col + row * npos;
                    if (iz < 0 || iz >= d) {
                        std::memset(dst, 0, npos * sizeof(double));
                        continue;
                    }
                    const double* plane = ch + std::size_t(iz) * npos;
                    const int sx = kx - KH;
                    for (int y = 0; y < h; ++y) {
                        const int iy = y + ky - KH;
                        double* drow = dst + std::size_t(y) * w;
                        if (iy < 0 || iy >= h) {
                            std::memset(drow, 0, w * sizeof(double));
                            continue;
                        }
                        const double* srow = plane + std::size_t(iy) * w;
                        const int lo = std::max(0, -sx), hi = std::min(w, w - sx);
                        if (lo > 0) std::memset(drow, 0, lo * sizeof(double));
                        if (hi > lo) std::memcpy(drow + lo, srow + lo + sx, (hi - lo) * sizeof(double));
                        if (hi < w) std::memset(drow + hi, 0, (w - hi) * sizeof(double));
                    }
                }
            }
        }
    }
}

// Adds the columns of a dCol matrix back into the input-gradient raster
// (transpose of fill_col).
void scatter_col(double* col, ChannelRaster& grad, int z) {
    const int h = grad.height, w = grad.width, d = grad.depth;
    const std::size_t npos = std::size_t(h) * w;
    std::size_t row = 0;
    for (int ic = 0; ic < grad.channels; ++ic) {
        double* ch = grad.channel(ic);
        for (int kz = 0; kz < K; ++kz) {
            const int iz = z + kz - KH;
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx, ++row) {
                    if (iz < 0 || iz >= d) continue;
                    const double* src = col + row * npos;
                    double* plane = ch + std::size_t(iz) * npos;
                    const int sx = kx - KH;
                    for (int y = 0; y < h; ++y) {
                        const int iy = y + ky - KH;
                        if (iy < 0 || iy >= h) continue;
                        const double* srow = src + std::size_t(y) * w;
                        double* drow = plane + std::size_t(iy) * w;
                        const int lo = std::max(0, -sx), hi = std::min(w, w - sx);
                        for (int x = lo; x < hi; ++x) drow[x + sx] += srow[x];
                    }
                }
            }
        }
    }
}

void check_shapes(const Conv3dParams& p, const ChannelRaster& in) {
    if (in.channels != p.in_channels)
        throw std::invalid_argument("conv3d: input channel count mismatch");
}

}  // namespace

void conv3d_forward(const Conv3dParams& p, const ChannelRaster& in, ChannelRaster& out,
                    bool relu) {
    check_shapes(p, in);
    out = ChannelRaster(p.out_channels, in.depth, in.height, in.width);
    const std::size_t npos = std::size_t(in.height) * in.width;
    const int kdim = p.in_channels * K * K * K;

#pragma omp parallel num_threads(num_threads())
    {
        TrackedVec col(std::size_t(kdim) * npos);
#pragma omp for schedule(static)
        for (int z = 0; z < in.depth; ++z) {
            fill_col(in, z, col.data());
            TrackedVec res(std::size_t(p.out_channels) * npos);
            cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, p.out_channels,
                        int(npos), kdim, 1.0, p.weights.data(), kdim, col.data(),
                        int(npos), 0.0, res.data(), int(npos));
            for (int oc = 0; oc < p.out_channels; ++oc) {
                double* dst = out.channel(oc) + std::size_t(z) * npos;
                const double* src = res.data() + oc * npos;
                const double b = p.bias[oc];
                if (relu)
                    for (std::size_t i = 0; i < npos; ++i) dst[i] = std::max(0.0, src[i] + b);
                else
                    for (std::size_t i = 0; i < npos; ++i) dst[i] = src[i] + b;
            }
        }
    }
}

void conv3d_forward_ref(const Conv3dParams& p, const ChannelRaster& in, ChannelRaster& out,
                        bool relu) {
    check_shapes(p, in);
    out = ChannelRaster(p.out_channels, in.depth, in.height, in.width);
    for (int oc = 0; oc < p.out_channels; ++oc) {
        for (int z = 0; z < in.depth; ++z)
            for (int y = 0; y < in.height; ++y)
                for (int x = 0; x < in.width; ++x) {
                    double sum = p.bias[oc];
                    for (int ic = 0; ic < p.in_channels; ++ic)
                        for (int kz = 0; kz < K; ++kz)
                            for (int ky = 0; ky < K; ++ky)
                                for (int kx = 0; kx < K; ++kx) {
                                    const int iz = z + kz - KH, iy = y + ky - KH,
                                              ix = x + kx - KH;
                                    if (iz < 0 || iz >= in.depth || iy < 0 ||
                                        iy >= in.height || ix < 0 || ix >= in.width)
                                        continue;
                                    const double wv =
                                        p.weights[(((std::size_t(oc) * p.in_channels + ic) * K +
                                                    kz) * K + ky) * K + kx];
                                    sum += wv * in.channel(ic)[(std::size_t(iz) * in.height + iy) *
                                                                   in.width + ix];
                                }
                    const double v = relu ? std::max(0.0, sum) : sum;
                    out.channel(oc)[(std::size_t(z) * in.height + y) * in.width + x] = v;
                }
    }
}

namespace {

// Backward of a single conv layer: accumulates weight/bias grads and, when
// in_grad is non-null, adds the input gradient. upstream is the gradient
// w.r.t. the (pre-ReLU-masked) layer output.
void conv3d_backward(const Conv3dParams& p, const ChannelRaster& in,
                     const ChannelRaster& upstream, Conv3dParams& grads,
                     ChannelRaster* in_grad) {
    check_shapes(p, in);
    const std::size_t npos = std::size_t(in.height) * in.width;
    const int kdim = p.in_channels * K * K * K;
    TrackedVec col(std::size_t(kdim) * npos);
    TrackedVec dcol(in_grad ? std::size_t(kdim) * npos : 0);

    // serial over slices in fixed order so accumulation is deterministic
    for (int z = 0; z < in.depth; ++z) {
        fill_col(in, z, col.data());
        const double* up = upstream.data.data();
        TrackedVec upz(std::size_t(p.out_channels) * npos);
        for (int oc = 0; oc < p.out_channels; ++oc) {
            const double* src = up + (std::size_t(oc) * in.depth + z) * npos;
            std::memcpy(upz.data() + oc * npos, src, npos * sizeof(double));
            double bsum = 0.0;
            for (std::size_t i = 0; i < npos; ++i) bsum += src[i];
            grads.bias[oc] += bsum;
        }
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, p.out_channels, kdim,
                    int(npos), 1.0, upz.data(), int(npos), col.data(), int(npos), 1.0,
                    grads.weights.data(), kdim);
        if (in_grad) {
            cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kdim, int(npos),
                        p.out_channels, 1.0, p.weights.data(), kdim, upz.data(), int(npos),
                        0.0, dcol.data(), int(npos));
            scatter_col(dcol.data(), *in_grad, z);
        }
    }
}

void relu_mask(ChannelRaster& grad, const ChannelRaster& post_act) {
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (post_act.data[i] <= 0.0) grad.data[i] = 0.0;
}

}  // namespace

ChannelRaster conv_block_forward(const ConvBlockParams& p, const ChannelRaster& input,
                                 ConvBlockActivations& acts) {
    conv3d_forward(p.layer1, input, acts.a1, true);
    conv3d_forward(p.layer2, acts.a1, acts.a2, true);
    ChannelRaster out;
    conv3d_forward(p.layer3, acts.a2, out, false);
    return out;
}

ChannelRaster conv_block_forward(const ConvBlockParams& p, const ChannelRaster& input) {
    ConvBlockActivations acts;
    return conv_block_forward(p, input, acts);
}

ChannelRaster conv_block_backward(const ConvBlockParams& p, const ChannelRaster& input,
                                  const ConvBlockActivations& acts,
                                  const ChannelRaster& upstream, ConvBlockParams& grads) {
    if (upstream.channels != 1 || upstream.spatial_size() != input.spatial_size())
        throw std::invalid_argument("conv_block_backward: upstream shape mismatch");
    ChannelRaster da2(acts.a2.channels, acts.a2.depth, acts.a2.height, acts.a2.width);
    conv3d_backward(p.layer3, acts.a2, upstream, grads.layer3, &da2);
    relu_mask(da2, acts.a2);

    ChannelRaster da1(acts.a1.channels, acts.a1.depth, acts.a1.height, acts.a1.width);
    conv3d_backward(p.layer2, acts.a1, da2, grads.layer2, &da1);
    relu_mask(da1, acts.a1);

    ChannelRaster din(input.channels, input.depth, input.height, input.width);
    conv3d_backward(p.layer1, input, da1, grads.layer1, &din);
    return din;
}

// ---- network parameters ---------------------------------------------------

NetworkParams NetworkParams::zero_init(int m) {
    if (m < 1) throw std::invalid_argument("NetworkParams: M must be >= 1");
    NetworkParams n;
    n.unrolled_iterations = m;
    for (int i = 0; i < m; ++i) {
        n.gamma.emplace_back(2);
        n.lambda.emplace_back(1);
    }
    return n;
}

namespace {
void kaiming_uniform(Conv3dParams& p, CounterRng& rng) {
    const double fan_in = double(p.in_channels) * K * K * K;
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& w : p.weights) w = rng.next_uniform(-bound, bound);
    // nonzero hidden biases keep the ReLU layers active on an all-zero
    // input, so gradients can reach the (zero) output layers from step 1
    const double bbound = 1.0 / std::sqrt(fan_in);
    for (double& b : p.bias) b = rng.next_uniform(-bbound, bbound);
}
}  // namespace

NetworkParams NetworkParams::default_init(int m, std::uint64_t seed) {
    NetworkParams n = zero_init(m);
    CounterRng rng(seed, 0x696e6974ull);
    for (int i = 0; i < m; ++i) {
        kaiming_uniform(n.gamma[i].layer1, rng);
        kaiming_uniform(n.gamma[i].layer2, rng);
        kaiming_uniform(n.lambda[i].layer1, rng);
        kaiming_uniform(n.lambda[i].layer2, rng);
        // output layers stay zero: the initial network is the identity map
    }
    return n;
}

NetworkParams NetworkParams::zero_like() const {
    NetworkParams n = zero_init(unrolled_iterations);
    n.op_scale = op_scale;
    return n;
}

std::size_t NetworkParams::num_params() const {
    std::size_t n = 0;
    for (const auto& b : gamma) n += b.num_params();
    for (const auto& b : lambda) n += b.num_params();
    return n;
}

namespace {
template <class P, class Fn>
void traverse_layer(P& layer, Fn& fn) {
    for (auto& w : layer.weights) fn(w);
    for (auto& b : layer.bias) fn(b);
}
template <class P, class Fn>
void traverse(P& params, Fn fn) {
    for (int i = 0; i < params.unrolled_iterations; ++i) {
        traverse_layer(params.gamma[i].layer1, fn);
        traverse_layer(params.gamma[i].layer2, fn);
        traverse_layer(params.gamma[i].layer3, fn);
        traverse_layer(params.lambda[i].layer1, fn);
        traverse_layer(params.lambda[i].layer2, fn);
        traverse_layer(params.lambda[i].layer3, fn);
    }
}
}  // namespace

void NetworkParams::for_each(const std::function<void(double&)>& fn) { traverse(*this, fn); }
void NetworkParams::for_each(const std::function<void(const double&)>& fn) const {
    traverse(*this, fn);
}

// ---- Adam -----------------------------------------------------------------

double cosine_lr(const AdamConfig& cfg, int step) {
    return cfg.lr0 * 0.5 * (1.0 + std::cos(3.141592653589793 * step / cfg.total_steps));
}

void adam_step(NetworkParams& params, const GradientTape& tape, AdamState& state,
               int step_index, const AdamConfig& cfg) {
    if (step_index >= cfg.total_steps)
        throw std::invalid_argument("adam_step: step_index past total_steps");
    const std::size_t n = params.num_params();
    if (state.m.size() != n) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    std::vector<double> grads;
    grads.reserve(n);
    tape.for_each([&](const double& g) { grads.push_back(g); });
    if (grads.size() != n)
        throw std::invalid_argument("adam_step: tape/parameter shape mismatch");

    const double lr = cosine_lr(cfg, step_index);
    const int t = step_index + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    std::size_t i = 0;
    params.for_each([&](double& w) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        w -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        ++i;
    });
}

// ---- checkpoints ----------------------------------------------------------

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     std::uint64_t seed, int step_count) {
    std::vector<float> blob;
    blob.reserve(params.num_params());
    params.for_each([&](const double& w) { blob.push_back(float(w)); });

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(blob.data()), blob.size() * sizeof(float));
    if (!f) throw std::runtime_error("write failed: " + path);

    nlohmann::json j;
    j["unrolled_iterations"] = params.unrolled_iterations;
    j["op_scale"] = params.op_scale;
    j["seed"] = seed;
    j["step_count"] = step_count;
    j["architecture"] = {{"hidden1", 32}, {"hidden2", 16}, {"kernel", kKernelSize},
                         {"gamma_in_channels", 2}, {"lambda_in_channels", 1}};
    j["param_count"] = blob.size();
    j["order"] = "per iteration: gamma layers 1-3 (weights, bias), lambda layers 1-3";
    std::ofstream mf(path + ".json");
    mf << j.dump(2) << "\n";
}

NetworkParams load_checkpoint(const std::string& path, std::uint64_t* seed, int* step_count) {
    std::ifstream mf(path + ".json");
    if (!mf) throw std::runtime_error("cannot open manifest " + path + ".json");
    nlohmann::json j = nlohmann::json::parse(mf);
    NetworkParams params = NetworkParams::zero_init(j.at("unrolled_iterations").get<int>());
    params.op_scale = j.value("op_scale", 1.0);
    if (seed) *seed = j.value("seed", std::uint64_t(0));
    if (step_count) *step_count = j.value("step_count", 0);

    const std::size_t n = params.num_params();
    if (j.value("param_count", n) != n)
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    std::vector<float> blob(n);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.read(reinterpret_cast<char*>(blob.data()), n * sizeof(float));
    if (!f) throw std::runtime_error("truncated checkpoint " + path);
    std::size_t i = 0;
    params.for_each([&](double& w) { w = blob[i++]; });
    return params;
}

}  // namespace hct
