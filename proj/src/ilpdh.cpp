#include "hct/ilpdh.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "hct/rng.hpp"

namespace hct {

VolumeSpec WindowView::window_spec() const {
    VolumeSpec s = full_spec;
    s.num_slices = slice_end - slice_begin;
    s.z_origin = full_spec.z_origin + slice_begin * full_spec.dz;
    return s;
}

WindowView make_window(const HelicalGeometry& geom, const TurnPartition& partition,
                       const VolumeSpec& full_spec, int first_turn, int num_turns) {
    if (num_turns < 1 || first_turn < 0 || first_turn + num_turns > partition.num_turns())
        throw std::invalid_argument("make_window: turn range out of bounds");
    WindowView w;
    w.geom = &geom;
    w.partition = partition;
    w.full_spec = full_spec;
    w.first_turn = first_turn;
    w.num_turns = num_turns;
    w.angle_begin = partition.turn_ranges[first_turn].first;
    w.angle_end = partition.turn_ranges[first_turn + num_turns - 1].second;
    w.slice_begin = full_spec.num_slices;
    w.slice_end = 0;
    for (int k = 0; k < num_turns; ++k) {
        const auto [lo, hi] = partition.subvolume_ranges[first_turn + k];
        w.slice_begin = std::min(w.slice_begin, lo);
        w.slice_end = std::max(w.slice_end, hi);
    }
    return w;
}

LpdState zero_state(const WindowView& w) {
    LpdState s;
    s.f = Volume(w.window_spec());
    const DetectorSpec& d = w.geom->detector;
    s.u = Sinogram(w.angle_end - w.angle_begin, d.num_rows, d.num_cols);
    return s;
}

namespace {

struct TurnGeom {
    int j;                    // absolute turn index
    int a, b;                 // absolute angle range
    int ua, ub;               // angle range relative to the window
    int lo, hi;               // absolute slab slice range
    int rlo, rhi;             // slab range relative to the window
    VolumeSpec sub_spec;
};

TurnGeom turn_geom(const WindowView& w, int k) {
    TurnGeom t;
    t.j = w.turn(k);
    std::tie(t.a, t.b) = w.partition.turn_ranges[t.j];
    t.ua = t.a - w.angle_begin;
    t.ub = t.b - w.angle_begin;
    std::tie(t.lo, t.hi) = w.partition.subvolume_ranges[t.j];
    t.rlo = t.lo - w.slice_begin;
    t.rhi = t.hi - w.slice_begin;
    t.sub_spec = subvolume_spec(w.full_spec, w.partition, t.j);
    return t;
}

Volume extract_slab(const Volume& f, const TurnGeom& t) {
    Volume sub(t.sub_spec);
    const std::size_t plane = std::size_t(f.spec.height) * f.spec.width;
    std::copy(f.data.begin() + t.rlo * plane, f.data.begin() + t.rhi * plane,
              sub.data.begin());
    return sub;
}

Sinogram extract_chunk(const Sinogram& u, const TurnGeom& t) {
    Sinogram chunk(t.b - t.a, u.num_rows, u.num_cols);
    const std::size_t proj = std::size_t(u.num_rows) * u.num_cols;
    std::copy(u.data.begin() + t.ua * proj, u.data.begin() + t.ub * proj,
              chunk.data.begin());
    return chunk;
}

struct BlockEval {
    ChannelRaster input;
    ConvBlockActivations acts;
    ChannelRaster out;
};

BlockEval eval_dual(const LpdState& state, const Sinogram& g, const NetworkParams& params,
                    const WindowView& w, int i, const TurnGeom& t) {
    const Volume sub = extract_slab(state.f, t);
    const Sinogram ajf = forward_project_range(sub, *w.geom, t.a, t.b);
    BlockEval e;
    e.input = ChannelRaster(2, t.b - t.a, g.num_rows, g.num_cols);
    const std::size_t n = ajf.size();
    const std::size_t proj = std::size_t(g.num_rows) * g.num_cols;
    for (std::size_t q = 0; q < n; ++q) {
        e.input.data[q] = params.op_scale * ajf.data[q];
        e.input.data[n + q] = g.data[t.ua * proj + q];
    }
    e.out = conv_block_forward(params.gamma[i], e.input, e.acts);
    return e;
}

BlockEval eval_primal(const LpdState& state, const NetworkParams& params,
                      const WindowView& w, int i, const TurnGeom& t) {
    const Sinogram chunk = extract_chunk(state.u, t);
    const Volume bp = back_project_range(chunk, *w.geom, t.a, t.b, t.sub_spec);
    BlockEval e;
    e.input = ChannelRaster(1, t.sub_spec.num_slices, t.sub_spec.height, t.sub_spec.width);
    for (std::size_t q = 0; q < bp.data.size(); ++q)
        e.input.data[q] = params.op_scale * bp.data[q];
    e.out = conv_block_forward(params.lambda[i], e.input, e.acts);
    return e;
}

void apply_dual(LpdState& state, const BlockEval& e, const TurnGeom& t, double sign) {
    const std::size_t proj = std::size_t(state.u.num_rows) * state.u.num_cols;
    double* dst = state.u.data.data() + t.ua * proj;
    for (std::size_t q = 0; q < e.out.size(); ++q) dst[q] += sign * e.out.data[q];
}

void apply_primal(LpdState& state, const BlockEval& e, const TurnGeom& t, double sign) {
    const std::size_t plane = std::size_t(state.f.spec.height) * state.f.spec.width;
    double* dst = state.f.data.data() + t.rlo * plane;
    for (std::size_t q = 0; q < e.out.size(); ++q) dst[q] += sign * e.out.data[q];
}

// dual block: u += P~(Gamma(s A^j f, g^j)); df += s (A^j)* dGamma_in[ch 0]
void grad_dual(BlockEval& e, Volume& df, Sinogram& du, GradientTape& tape,
               const NetworkParams& params, const WindowView& w, int i, const TurnGeom& t) {
    ChannelRaster upstream(1, t.b - t.a, du.num_rows, du.num_cols);
    const std::size_t proj = std::size_t(du.num_rows) * du.num_cols;
    std::memcpy(upstream.data.data(), du.data.data() + t.ua * proj,
                upstream.size() * sizeof(double));
    const ChannelRaster din =
        conv_block_backward(params.gamma[i], e.input, e.acts, upstream, tape.gamma[i]);
    Sinogram dchunk(t.b - t.a, du.num_rows, du.num_cols);
    std::memcpy(dchunk.data.data(), din.channel(0), dchunk.size() * sizeof(double));
    const Volume bp = back_project_range(dchunk, *w.geom, t.a, t.b, t.sub_spec);
    const std::size_t plane = std::size_t(df.spec.height) * df.spec.width;
    double* dst = df.data.data() + t.rlo * plane;
    for (std::size_t q = 0; q < bp.data.size(); ++q)
        dst[q] += params.op_scale * bp.data[q];
}

// primal block: f += P~(Lambda(s (A^j)* u^j)); du += s A^j dLambda_in
void grad_primal(BlockEval& e, Volume& df, Sinogram& du, GradientTape& tape,
                 const NetworkParams& params, const WindowView& w, int i,
                 const TurnGeom& t) {
    ChannelRaster upstream(1, t.sub_spec.num_slices, t.sub_spec.height, t.sub_spec.width);
    const std::size_t plane = std::size_t(df.spec.height) * df.spec.width;
    std::memcpy(upstream.data.data(), df.data.data() + t.rlo * plane,
                upstream.size() * sizeof(double));
    const ChannelRaster din =
        conv_block_backward(params.lambda[i], e.input, e.acts, upstream, tape.lambda[i]);
    Volume dvol(t.sub_spec);
    std::memcpy(dvol.data.data(), din.channel(0), dvol.data.size() * sizeof(double));
    const Sinogram dproj = forward_project_range(dvol, *w.geom, t.a, t.b);
    const std::size_t proj = std::size_t(du.num_rows) * du.num_cols;
    double* dst = du.data.data() + t.ua * proj;
    for (std::size_t q = 0; q < dproj.size(); ++q)
        dst[q] += params.op_scale * dproj.data[q];
}

void check_finite(const LpdState& state, int i, int j, const char* phase) {
    for (double v : state.f.data)
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite primal state during " << phase << " at iteration " << i
                << ", turn " << j;
            throw std::runtime_error(msg.str());
        }
    for (double v : state.u.data)
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite dual state during " << phase << " at iteration " << i
                << ", turn " << j;
            throw std::runtime_error(msg.str());
        }
}

// Accumulates the largest absolute deviation and the largest stored-state
// magnitude; the drift reported to the caller is their ratio over the whole
// trajectory (a per-snapshot ratio would blow up on the all-zero start).
void drift_accumulate(const LpdState& a, const LpdState& b, double& num, double& den) {
    for (std::size_t q = 0; q < a.f.data.size(); ++q) {
        num = std::max(num, std::abs(a.f.data[q] - b.f.data[q]));
        den = std::max(den, std::abs(b.f.data[q]));
    }
    for (std::size_t q = 0; q < a.u.data.size(); ++q) {
        num = std::max(num, std::abs(a.u.data[q] - b.u.data[q]));
        den = std::max(den, std::abs(b.u.data[q]));
    }
}

void forward_impl(LpdState& state, const Sinogram& g, const NetworkParams& params,
                  const WindowView& w, std::vector<LpdState>* snapshots) {
    if (int(params.gamma.size()) != params.unrolled_iterations ||
        int(params.lambda.size()) != params.unrolled_iterations)
        throw std::invalid_argument("ilpdh_forward: malformed network parameters");
    if (g.num_angles != w.angle_end - w.angle_begin)
        throw std::invalid_argument("ilpdh_forward: data does not cover the window");
    for (int i = 0; i < params.unrolled_iterations; ++i) {
        for (int k = 0; k < w.num_turns; ++k) {
            const TurnGeom t = turn_geom(w, k);
            if (snapshots) snapshots->push_back(state);
            {
                BlockEval e = eval_dual(state, g, params, w, i, t);
                apply_dual(state, e, t, +1.0);
            }
            check_finite(state, i, t.j, "forward dual update");
            if (snapshots) snapshots->push_back(state);
            {
                BlockEval e = eval_primal(state, params, w, i, t);
                apply_primal(state, e, t, +1.0);
            }
            check_finite(state, i, t.j, "forward primal update");
        }
    }
}

}  // namespace

void ilpdh_forward(LpdState& state, const Sinogram& g, const NetworkParams& params,
                   const WindowView& w) {
    forward_impl(state, g, params, w, nullptr);
}

void ilpdh_forward_with_snapshots(LpdState& state, const Sinogram& g,
                                  const NetworkParams& params, const WindowView& w,
                                  std::vector<LpdState>& snapshots) {
    snapshots.clear();
    forward_impl(state, g, params, w, &snapshots);
}

GradientTape ilpdh_backward_invertible(LpdState& state, const Volume& loss_grad,
                                       const Sinogram& g, const NetworkParams& params,
                                       const WindowView& w,
                                       const std::vector<LpdState>* check_states,
                                       double* max_drift) {
    GradientTape tape = params.zero_like();
    Volume df = loss_grad;
    Sinogram du(state.u.num_angles, state.u.num_rows, state.u.num_cols);
    double drift_num = 0.0, drift_den = 0.0;
    std::ptrdiff_t snap = check_states ? std::ptrdiff_t(check_states->size()) : 0;

    for (int i = params.unrolled_iterations - 1; i >= 0; --i) {
        for (int k = w.num_turns - 1; k >= 0; --k) {
            const TurnGeom t = turn_geom(w, k);
            {
                // primal inverse: f_i = f_{i+1} - P~(Lambda(...)), u unchanged
                BlockEval e = eval_primal(state, params, w, i, t);
                apply_primal(state, e, t, -1.0);
                check_finite(state, i, t.j, "inversion of primal update");
                if (check_states && max_drift)
                    drift_accumulate(state, (*check_states)[--snap], drift_num, drift_den);
                grad_primal(e, df, du, tape, params, w, i, t);
            }
            {
                // dual inverse: u_{i-1} = u_i - P~(Gamma(...)), f unchanged
                BlockEval e = eval_dual(state, g, params, w, i, t);
                apply_dual(state, e, t, -1.0);
                check_finite(state, i, t.j, "inversion of dual update");
                if (check_states && max_drift)
                    drift_accumulate(state, (*check_states)[--snap], drift_num, drift_den);
                grad_dual(e, df, du, tape, params, w, i, t);
            }
        }
    }
    if (max_drift) *max_drift = drift_num / (drift_den + 1e-300);
    return tape;
}

GradientTape ilpdh_backward_reference(const LpdState& initial_state, const Volume& loss_grad,
                                      const Sinogram& g, const NetworkParams& params,
                                      const WindowView& w) {
    std::vector<LpdState> snapshots;
    LpdState state = initial_state;
    ilpdh_forward_with_snapshots(state, g, params, w, snapshots);

    GradientTape tape = params.zero_like();
    Volume df = loss_grad;
    Sinogram du(state.u.num_angles, state.u.num_rows, state.u.num_cols);
    std::ptrdiff_t snap = std::ptrdiff_t(snapshots.size());

    for (int i = params.unrolled_iterations - 1; i >= 0; --i) {
        for (int k = w.num_turns - 1; k >= 0; --k) {
            const TurnGeom t = turn_geom(w, k);
            {
                const LpdState& before = snapshots[--snap];
                BlockEval e = eval_primal(before, params, w, i, t);
                grad_primal(e, df, du, tape, params, w, i, t);
            }
            {
                const LpdState& before = snapshots[--snap];
                BlockEval e = eval_dual(before, g, params, w, i, t);
                grad_dual(e, df, du, tape, params, w, i, t);
            }
        }
    }
    return tape;
}

double estimate_op_norm(const HelicalGeometry& geom, const VolumeSpec& spec, int iters,
                        std::uint64_t seed) {
    Volume v(spec);
    CounterRng rng(seed, 0x6f706e6f726dull);
    for (double& x : v.data) x = rng.next_uniform(-1.0, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        const Sinogram av = forward_project(v, geom);
        Volume w = back_project(av, geom, spec);
        double n = 0.0;
        for (double x : w.data) n += x * x;
        n = std::sqrt(n);
        if (n == 0.0) return 0.0;
        double vn = 0.0;
        for (double x : v.data) vn += x * x;
        lambda = n / std::sqrt(vn);  // Rayleigh estimate of lambda_max(A*A)
        for (std::size_t q = 0; q < v.data.size(); ++q) v.data[q] = w.data[q] / n;
    }
    return std::sqrt(lambda);
}

}  // namespace hct
