#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hct/ilpdh.hpp"
#include "hct/rng.hpp"

using namespace hct;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Instance {
    HelicalGeometry geom;
    VolumeSpec spec;
    TurnPartition partition;
    WindowView window;
    Sinogram g;
};

Instance make_instance(double turns, std::uint64_t seed, int wh = 6, int nz = 12) {
    Instance inst;
    DetectorSpec det{8, 4, 4.0, 4.0};
    inst.geom = build_geometry(kTwoPi / 12, {10.0}, turns, 50.0, 100.0, det, 0.0);
    inst.spec.width = inst.spec.height = wh;
    inst.spec.num_slices = nz;
    inst.spec.dx = inst.spec.dy = 2.0;
    inst.spec.dz = 2.0;
    inst.spec.z_origin = -1.0;
    inst.partition =
        partition_turns(inst.geom, inst.spec, min_subvolume_thickness(inst.geom, inst.spec));
    inst.window = make_window(inst.geom, inst.partition, inst.spec, 0,
                              inst.partition.num_turns());
    inst.g = Sinogram(inst.window.angle_end - inst.window.angle_begin, det.num_rows,
                      det.num_cols);
    CounterRng rng(seed, 0xe0);
    for (double& v : inst.g.data) v = rng.next_uniform(0.0, 0.5);
    return inst;
}

NetworkParams active_params(int m, const Instance& inst, std::uint64_t seed) {
    NetworkParams p = NetworkParams::default_init(m, seed);
    p.op_scale = 1.0 / estimate_op_norm(inst.geom, inst.spec, 15);
    CounterRng rng(seed, 0xe1);
    for (int i = 0; i < m; ++i) {
        for (double& w : p.gamma[i].layer3.weights) w = rng.next_uniform(-0.1, 0.1);
        for (double& w : p.lambda[i].layer3.weights) w = rng.next_uniform(-0.1, 0.1);
    }
    return p;
}

std::vector<double> flat(const GradientTape& t) {
    std::vector<double> v;
    t.for_each([&](const double& x) { v.push_back(x); });
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double max_abs(const std::vector<double>& a) {
    double d = 0.0;
    for (double v : a) d = std::max(d, std::abs(v));
    return d;
}

}  // namespace

TEST_SUITE("ilpdh") {

TEST_CASE("window views cover contiguous turns and their slab union") {
    const Instance inst = make_instance(3.4, 1);
    REQUIRE(inst.partition.num_turns() == 3);
    const WindowView w = make_window(inst.geom, inst.partition, inst.spec, 1, 2);
    CHECK(w.angle_begin == inst.partition.turn_ranges[1].first);
    CHECK(w.angle_end == inst.partition.turn_ranges[2].second);
    CHECK(w.slice_begin ==
          std::min(inst.partition.subvolume_ranges[1].first,
                   inst.partition.subvolume_ranges[2].first));
    CHECK(w.slice_end == std::max(inst.partition.subvolume_ranges[1].second,
                                  inst.partition.subvolume_ranges[2].second));
    CHECK(w.window_spec().z_origin ==
          doctest::Approx(inst.spec.z_origin + w.slice_begin * inst.spec.dz));
    CHECK_THROWS(make_window(inst.geom, inst.partition, inst.spec, 2, 2));
}

TEST_CASE("the zero-initialized network is the identity map on the state") {
    const Instance inst = make_instance(2.2, 2);
    const NetworkParams zero = NetworkParams::zero_init(2);
    LpdState state = zero_state(inst.window);
    CounterRng rng(3, 0xe2);
    for (double& v : state.f.data) v = rng.next_uniform(-1.0, 1.0);
    const LpdState before = state;
    ilpdh_forward(state, inst.g, zero, inst.window);
    CHECK(state.f.data == before.f.data);
    CHECK(state.u.data == before.u.data);
}

TEST_CASE("forward snapshots one state per half-step") {
    const Instance inst = make_instance(2.2, 4);
    const NetworkParams p = active_params(2, inst, 4);
    LpdState state = zero_state(inst.window);
    std::vector<LpdState> snaps;
    ilpdh_forward_with_snapshots(state, inst.g, p, inst.window, snaps);
    CHECK(int(snaps.size()) == 2 * 2 * inst.partition.num_turns());
}

TEST_CASE("invertible backward restores the initial state exactly enough") {
    for (int m : {1, 2}) {
        const Instance inst = make_instance(2.2, 5);
        const NetworkParams p = active_params(m, inst, 5 + m);
        LpdState state = zero_state(inst.window);
        const LpdState initial = state;
        std::vector<LpdState> snaps;
        ilpdh_forward_with_snapshots(state, inst.g, p, inst.window, snaps);

        Volume loss_grad(inst.window.window_spec());
        CounterRng rng(6, 0xe3);
        for (double& v : loss_grad.data) v = rng.next_uniform(-1.0, 1.0);
        double drift = -1.0;
        ilpdh_backward_invertible(state, loss_grad, inst.g, p, inst.window, &snaps, &drift);
        CHECK(drift >= 0.0);
        CHECK(drift <= 1e-10);
        CHECK(max_abs_diff(state.f.data, initial.f.data) <= 1e-10);
        CHECK(max_abs_diff(state.u.data, initial.u.data) <= 1e-10);
    }
}

TEST_CASE("invertible gradients equal stored-activation gradients") {
    for (int m : {1, 2}) {
        const Instance inst = make_instance(2.2, 7);
        const NetworkParams p = active_params(m, inst, 8 + m);
        LpdState state = zero_state(inst.window);
        const LpdState initial = state;
        ilpdh_forward(state, inst.g, p, inst.window);
        Volume loss_grad(inst.window.window_spec());
        CounterRng rng(9, 0xe4);
        for (double& v : loss_grad.data) v = rng.next_uniform(-1.0, 1.0);

        const std::vector<double> inv =
            flat(ilpdh_backward_invertible(state, loss_grad, inst.g, p, inst.window));
        const std::vector<double> ref =
            flat(ilpdh_backward_reference(initial, loss_grad, inst.g, p, inst.window));
        REQUIRE(inv.size() == ref.size());
        CHECK(max_abs_diff(inv, ref) <= 1e-5 * std::max(max_abs(ref), 1e-12));
    }
}

TEST_CASE("gradients match central finite differences on sampled parameters") {
    const Instance inst = make_instance(2.2, 10, 5, 10);
    NetworkParams p = active_params(1, inst, 11);
    Volume loss_grad(inst.window.window_spec());
    CounterRng rng(12, 0xe5);
    for (double& v : loss_grad.data) v = rng.next_uniform(-1.0, 1.0);

    auto loss_of = [&](const NetworkParams& q) {
        LpdState state = zero_state(inst.window);
        ilpdh_forward(state, inst.g, q, inst.window);
        double s = 0.0;
        for (std::size_t i = 0; i < state.f.data.size(); ++i)
            s += state.f.data[i] * loss_grad.data[i];
        return s;
    };

    LpdState state = zero_state(inst.window);
    ilpdh_forward(state, inst.g, p, inst.window);
    const std::vector<double> grad =
        flat(ilpdh_backward_invertible(state, loss_grad, inst.g, p, inst.window));
    const double gscale = max_abs(grad);
    REQUIRE(gscale > 0.0);  // a dead network would make the checks below vacuous

    // flatten parameter slots for indexed perturbation
    std::vector<double*> slots;
    p.for_each([&](double& w) { slots.push_back(&w); });
    const double h = 1e-5;
    for (int s = 0; s < 12; ++s) {
        const std::size_t i = rng.next_below(slots.size());
        const double save = *slots[i];
        *slots[i] = save + h;
        const double up = loss_of(p);
        *slots[i] = save - h;
        const double dn = loss_of(p);
        *slots[i] = save;
        const double fd = (up - dn) / (2 * h);
        const double tol = std::max(2e-4 * std::max(std::abs(fd), std::abs(grad[i])),
                                    1e-8 * std::max(gscale, 1.0));  // FD roundoff floor
        CHECK(std::abs(grad[i] - fd) <= tol);
    }
}

TEST_CASE("non-finite states are reported with iteration and turn") {
    const Instance inst = make_instance(2.2, 13);
    NetworkParams p = NetworkParams::zero_init(1);
    for (double& w : p.gamma[0].layer1.weights) w = 1e200;
    for (double& w : p.gamma[0].layer2.weights) w = 1e200;
    for (double& w : p.gamma[0].layer3.weights) w = 1e200;
    LpdState state = zero_state(inst.window);
    CHECK_THROWS_WITH_AS(ilpdh_forward(state, inst.g, p, inst.window),
                         doctest::Contains("iteration 0"), std::runtime_error);
}

TEST_CASE("mismatched data is rejected") {
    const Instance inst = make_instance(2.2, 14);
    const NetworkParams p = NetworkParams::zero_init(1);
    LpdState state = zero_state(inst.window);
    Sinogram bad(inst.g.num_angles - 1, inst.g.num_rows, inst.g.num_cols);
    CHECK_THROWS_AS(ilpdh_forward(state, bad, p, inst.window), std::invalid_argument);
}

TEST_CASE("backprop activation memory stays bounded by one block") {
    // doubling M must not grow the peak: only one block's activations are
    // ever live during the invertible walk
    auto peak_for = [&](int m) {
        const Instance inst = make_instance(2.2, 15);
        const NetworkParams p = active_params(m, inst, 16);
        LpdState state = zero_state(inst.window);
        ilpdh_forward(state, inst.g, p, inst.window);
        Volume loss_grad(inst.window.window_spec());
        for (double& v : loss_grad.data) v = 0.1;
        reset_activation_peak();
        const std::size_t base = activation_bytes_current();
        ilpdh_backward_invertible(state, loss_grad, inst.g, p, inst.window);
        return activation_bytes_peak() - base;
    };
    const std::size_t p2 = peak_for(2), p4 = peak_for(4);
    CHECK(double(p4) <= 1.10 * double(p2));
}

TEST_CASE("operator norm estimate dominates the Rayleigh quotient of test vectors") {
    const Instance inst = make_instance(2.2, 17);
    const double est = estimate_op_norm(inst.geom, inst.spec, 25, 3);
    CHECK(est > 0.0);
    CounterRng rng(18, 0xe6);
    for (int t = 0; t < 3; ++t) {
        Volume v(inst.spec);
        for (double& x : v.data) x = rng.next_uniform(-1.0, 1.0);
        const Sinogram av = forward_project(v, inst.geom);
        double num = 0, den = 0;
        for (double x : av.data) num += x * x;
        for (double x : v.data) den += x * x;
        CHECK(std::sqrt(num / den) <= est * 1.05);
    }
}

}  // TEST_SUITE
