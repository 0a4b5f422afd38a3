#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "hct/metrics.hpp"
#include "hct/projector.hpp"
#include "hct/recon.hpp"
#include "hct/rng.hpp"
#include "hct/simulation.hpp"
#include "hct/train.hpp"

using namespace hct;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

VolumeSpec grid(int wh, int nz, double voxel, double z0 = 0.0) {
    VolumeSpec v;
    v.width = v.height = wh;
    v.num_slices = nz;
    v.dx = v.dy = v.dz = voxel;
    v.z_origin = z0;
    return v;
}

Volume const_partial(const VolumeSpec& target, int slice_begin, int nz, double value) {
    VolumeSpec s = target;
    s.num_slices = nz;
    s.z_origin = target.z_origin + slice_begin * target.dz;
    Volume v(s);
    for (double& x : v.data) x = value;
    return v;
}

struct Scene {
    HelicalGeometry geom;
    VolumeSpec spec;
    TurnPartition partition;
    Sinogram g;
};

Scene small_scene(double turns, std::uint64_t seed) {
    Scene sc;
    DetectorSpec det{8, 4, 4.0, 4.0};
    sc.geom = build_geometry(kTwoPi / 12, {10.0}, turns, 50.0, 100.0, det, 0.0);
    sc.spec = grid(6, 12, 2.0, -1.0);
    sc.partition =
        partition_turns(sc.geom, sc.spec, min_subvolume_thickness(sc.geom, sc.spec));
    sc.g = Sinogram(sc.geom.num_angles(), det.num_rows, det.num_cols);
    CounterRng rng(seed, 0xf0);
    for (double& v : sc.g.data) v = rng.next_uniform(0.0, 0.5);
    return sc;
}

NetworkParams active_params(int m, std::uint64_t seed, double op_scale = 0.01) {
    NetworkParams p = NetworkParams::default_init(m, seed);
    p.op_scale = op_scale;
    CounterRng rng(seed, 0xf1);
    for (int i = 0; i < m; ++i) {
        for (double& w : p.gamma[i].layer3.weights) w = rng.next_uniform(-0.1, 0.1);
        for (double& w : p.lambda[i].layer3.weights) w = rng.next_uniform(-0.1, 0.1);
    }
    return p;
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("gluing weights: inverse distance inside the slab, zero outside") {
    CHECK(std::isinf(gluing_weight(3, 3, 5)));
    CHECK(gluing_weight(4, 3, 5) == 1.0);
    CHECK(gluing_weight(5, 3, 5) == 0.5);
    CHECK(gluing_weight(1, 3, 5) == 0.5);
    CHECK(gluing_weight(6, 3, 5) == 0.0);
    CHECK(gluing_weight(0, 3, 5) == 0.0);
}

TEST_CASE("gluing a single partial is the identity") {
    const VolumeSpec target = grid(3, 5, 1.0);
    GluePartial p;
    p.vol = const_partial(target, 0, 5, 0.0);
    CounterRng rng(1, 0xf2);
    for (double& v : p.vol.data) v = rng.next_uniform(-1.0, 1.0);
    p.slice_begin = 0;
    p.z_c = 2;
    p.z_t = 5;
    const Volume out = glue({p}, target);
    CHECK(out.data == p.vol.data);
}

TEST_CASE("gluing two constant partials gives hand-computed slice values") {
    const VolumeSpec target = grid(2, 9, 1.0);
    GluePartial a{const_partial(target, 0, 7, 1.0), 0, 3, 7};
    GluePartial b{const_partial(target, 4, 5, 3.0), 4, 7, 7};
    const Volume out = glue({a, b}, target);
    const std::vector<double> expect = {1.0, 1.0, 1.0, 1.0, 1.5, 2.0, 2.5, 3.0, 3.0};
    for (int z = 0; z < 9; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                CHECK(out.at(z, y, x) == doctest::Approx(expect[z]).epsilon(1e-12));
}

TEST_CASE("gluing identical partials reproduces them") {
    const VolumeSpec target = grid(2, 5, 1.0);
    GluePartial a{const_partial(target, 0, 5, 2.5), 0, 2, 5};
    const Volume out = glue({a, a}, target);
    for (double v : out.data) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("gluing rejects an uncovered slice") {
    const VolumeSpec target = grid(2, 4, 1.0);
    GluePartial a{const_partial(target, 0, 3, 1.0), 0, 1, 3};
    CHECK_THROWS(glue({a}, target));
}

TEST_CASE("a zero-initialized network reconstructs the initial volume") {
    const Scene sc = small_scene(2.2, 2);
    const NetworkParams zero = NetworkParams::zero_init(1);
    ReconConfig cfg;
    const Volume out = ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, zero, cfg);
    for (double v : out.data) CHECK(v == 0.0);
    const Volume full = ilpd_reconstruct(sc.g, sc.geom, sc.spec, zero, cfg);
    for (double v : full.data) CHECK(v == 0.0);
}

TEST_CASE("with a single turn the split scheme degenerates to the unsplit one") {
    DetectorSpec det{8, 4, 4.0, 4.0};
    const HelicalGeometry geom = build_geometry(kTwoPi / 12, {8.0}, 1.1, 50.0, 100.0, det, 0.0);
    // trimmed copy holding exactly the one complete turn for the unsplit route
    HelicalGeometry turn_only = geom;
    const int n0 = 12;
    turn_only.angles.resize(n0);
    turn_only.z_offsets.resize(n0);
    // center the volume on the turn's mean source z so its slab is the
    // entire (odd) slice range and both routes see identical operators
    const double meanz =
        std::accumulate(turn_only.z_offsets.begin(), turn_only.z_offsets.end(), 0.0) / n0;
    const int nz = 9;
    VolumeSpec spec = grid(6, nz, 2.0);
    spec.z_origin = meanz - (nz - 1) / 2 * spec.dz;
    const TurnPartition part = partition_turns(geom, spec, nz);
    REQUIRE(part.num_turns() == 1);
    REQUIRE(part.subvolume_ranges[0] == IndexRange{0, nz});
    REQUIRE(part.turn_ranges[0] == IndexRange{0, n0});

    Sinogram g(geom.num_angles(), det.num_rows, det.num_cols);
    CounterRng rng(3, 0xf3);
    for (double& v : g.data) v = rng.next_uniform(0.0, 0.5);
    Sinogram g0(n0, det.num_rows, det.num_cols);
    std::copy(g.data.begin(), g.data.begin() + g0.data.size(), g0.data.begin());
    const NetworkParams p = active_params(2, 4);
    ReconConfig cfg;
    cfg.unrolled_iterations = 2;
    const Volume split = ilpdh_reconstruct(g, geom, part, spec, p, cfg);
    const Volume unsplit = ilpd_reconstruct(g0, turn_only, spec, p, cfg);
    CHECK(split.data == unsplit.data);  // bitwise
}

TEST_CASE("single precision rounds the double-precision result to f32") {
    const Scene sc = small_scene(2.2, 5);
    const NetworkParams p = active_params(1, 6);
    ReconConfig cfg;
    const Volume d = ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg);
    cfg.precision = ReconConfig::Precision::kSingle;
    const Volume s = ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg);
    REQUIRE(s.data.size() == d.data.size());
    for (std::size_t i = 0; i < s.data.size(); ++i)
        CHECK(s.data[i] == double(float(d.data[i])));
}

TEST_CASE("checkpoint depth must match the requested unrolled iterations") {
    const Scene sc = small_scene(2.2, 7);
    const NetworkParams p = active_params(1, 8);
    ReconConfig cfg;
    cfg.unrolled_iterations = 2;
    CHECK_THROWS_AS(ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg),
                    std::invalid_argument);
}

TEST_CASE("the full-scan window makes sliding-window gluing a no-op") {
    const Scene sc = small_scene(2.2, 9);
    const NetworkParams p = active_params(1, 10);
    ReconConfig cfg;
    const Volume whole = ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg);
    const Volume glued = g_ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg,
                                             sc.partition.num_turns());
    CHECK(whole.data == glued.data);
}

TEST_CASE("sliding-window reconstruction composes window runs with gluing") {
    const Scene sc = small_scene(3.4, 11);
    REQUIRE(sc.partition.num_turns() == 3);
    const NetworkParams p = active_params(1, 12);
    ReconConfig cfg;
    const int window = 2;
    const Volume got = g_ilpdh_reconstruct(sc.g, sc.geom, sc.partition, sc.spec, p, cfg, window);

    // independent composition from the public window primitives
    std::vector<GluePartial> partials;
    int lo = sc.spec.num_slices, hi = 0;
    for (int q = 0; q + window <= sc.partition.num_turns(); ++q) {
        const WindowView w = make_window(sc.geom, sc.partition, sc.spec, q, window);
        LpdState state = zero_state(w);
        Sinogram gw(w.angle_end - w.angle_begin, sc.g.num_rows, sc.g.num_cols);
        const std::size_t proj = std::size_t(sc.g.num_rows) * sc.g.num_cols;
        std::copy(sc.g.data.begin() + w.angle_begin * proj,
                  sc.g.data.begin() + w.angle_end * proj, gw.data.begin());
        ilpdh_forward(state, gw, p, w);
        partials.push_back({std::move(state.f), w.slice_begin,
                            (w.slice_begin + w.slice_end - 1) / 2,
                            w.slice_end - w.slice_begin});
        lo = std::min(lo, w.slice_begin);
        hi = std::max(hi, w.slice_end);
    }
    VolumeSpec target = sc.spec;
    target.num_slices = hi - lo;
    target.z_origin = sc.spec.z_origin + lo * sc.spec.dz;
    for (auto& pr : partials) {
        pr.slice_begin -= lo;
        pr.z_c -= lo;
    }
    const Volume expect = glue(partials, target);
    REQUIRE(got.data.size() == expect.data.size());
    for (std::size_t i = 0; i < got.data.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
}

TEST_CASE("filtered backprojection of zero data is zero") {
    const Scene sc = small_scene(2.2, 13);
    const Sinogram zero(sc.geom.num_angles(), sc.g.num_rows, sc.g.num_cols);
    const Volume out = fbp_reconstruct(zero, sc.geom, sc.spec);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("filtered backprojection recovers a cylinder's attenuation level") {
    // noise-free water cylinder; interior mean must land near mu0
    const double mu0 = 0.0192;
    DetectorSpec det{32, 6, 4.0, 6.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 48, {12.0}, 4.0, 300.0, 600.0, det, -12.0);
    const VolumeSpec spec = grid(16, 12, 2.0, 0.0);
    Volume mu(spec);
    for (int z = 0; z < spec.num_slices; ++z)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const double px = (x - (spec.width - 1) / 2.0) * spec.dx;
                const double py = (y - (spec.height - 1) / 2.0) * spec.dy;
                if (px * px + py * py <= 10.0 * 10.0) mu.at(z, y, x) = mu0;
            }
    const Sinogram g = forward_project(mu, geom);
    const Volume rec = fbp_reconstruct(g, geom, spec);
    double sum = 0.0;
    int n = 0;
    for (int z = 4; z < spec.num_slices - 4; ++z)
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                const double px = (x - (spec.width - 1) / 2.0) * spec.dx;
                const double py = (y - (spec.height - 1) / 2.0) * spec.dy;
                if (px * px + py * py <= 6.0 * 6.0) {
                    sum += rec.at(z, y, x);
                    ++n;
                }
            }
    REQUIRE(n > 0);
    CHECK(sum / n == doctest::Approx(mu0).epsilon(0.10));
}

TEST_CASE("huber penalty is continuous across the threshold") {
    const double theta = 0.0012;
    CHECK(huber_penalty(0.0, theta) == 0.0);
    CHECK(huber_penalty(theta, theta) == doctest::Approx(theta / 2).epsilon(1e-14));
    CHECK(huber_penalty(theta * (1 + 1e-12), theta) ==
          doctest::Approx(theta / 2).epsilon(1e-9));
    CHECK(huber_penalty(2 * theta, theta) == doctest::Approx(1.5 * theta).epsilon(1e-14));
}

TEST_CASE("huber gradient matches central finite differences") {
    const Scene sc = small_scene(1.4, 14);
    HuberConfig cfg;
    cfg.lambda = 0.05;
    cfg.theta = 0.01;
    Volume f(sc.spec);
    CounterRng rng(15, 0xf4);
    for (double& v : f.data) v = rng.next_uniform(-0.05, 0.05);

    const Volume grad = huber_gradient(f, sc.g, sc.geom, cfg);
    const double h = 1e-6;
    for (int s = 0; s < 6; ++s) {
        const std::size_t i = rng.next_below(f.data.size());
        const double save = f.data[i];
        f.data[i] = save + h;
        const double up = huber_objective(f, sc.g, sc.geom, cfg);
        f.data[i] = save - h;
        const double dn = huber_objective(f, sc.g, sc.geom, cfg);
        f.data[i] = save;
        const double fd = (up - dn) / (2 * h);
        CHECK(grad.data[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("huber objective trace is nonincreasing and strictly improves") {
    const Scene sc = small_scene(1.4, 16);
    HuberConfig cfg;
    cfg.iterations = 8;
    std::vector<double> trace;
    huber_reconstruct(sc.g, sc.geom, sc.spec, cfg, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    CHECK(trace.back() < trace.front());
}

TEST_CASE("with zero regularization the solver descends on least squares") {
    const Scene sc = small_scene(1.4, 17);
    HuberConfig cfg;
    cfg.lambda = 0.0;
    cfg.iterations = 10;
    std::vector<double> trace;
    const Volume f = huber_reconstruct(sc.g, sc.geom, sc.spec, cfg, &trace);
    CHECK(trace.back() < 0.5 * trace.front());
    CHECK(huber_objective(f, sc.g, sc.geom, cfg) == doctest::Approx(trace.back()));
}

TEST_CASE("method configs survive a JSON round trip") {
    MethodConfig cfg;
    cfg.method = "g-ilpdh";
    cfg.recon.unrolled_iterations = 3;
    cfg.recon.init_mode = ReconConfig::InitMode::kFbp;
    cfg.recon.precision = ReconConfig::Precision::kSingle;
    cfg.train.iterations = 777;
    cfg.train.window = 1;
    cfg.train.lr0 = 1.25e-4;
    cfg.train.rng_seed = 99;
    cfg.huber.lambda = 0.3;
    cfg.fbp_bandwidth_fraction = 0.4;
    const MethodConfig r = method_config_from_json(method_config_to_json(cfg));
    CHECK(method_config_to_json(r) == method_config_to_json(cfg));
    CHECK(r.recon.init_mode == ReconConfig::InitMode::kFbp);
    CHECK_THROWS(method_config_from_json("{\"recon\": {\"init\": \"magic\"}}"));
}

TEST_CASE("window loss is the mean squared error with its exact gradient") {
    const VolumeSpec full = grid(3, 8, 1.0);
    Volume truth(full);
    for (double& v : truth.data) v = 2.0;
    VolumeSpec ws = full;
    ws.num_slices = 4;
    ws.z_origin = 2.0;
    Volume f(ws);
    for (double& v : f.data) v = 3.0;
    Volume grad(ws);
    const double loss = window_loss(f, truth, 2, grad);
    CHECK(loss == doctest::Approx(1.0).epsilon(1e-14));
    for (double gv : grad.data)
        CHECK(gv == doctest::Approx(2.0 / double(f.data.size())).epsilon(1e-14));
}

TEST_CASE("training is deterministic and its first loss is predictable") {
    const Scene sc = small_scene(2.2, 18);
    PhantomSpec ps = random_phantom(21, sc.spec);
    TrainScan scan;
    scan.truth = hu_to_mu(make_phantom(ps));
    scan.g = forward_project(scan.truth, sc.geom);

    TrainConfig cfg;
    cfg.iterations = 3;
    cfg.window = 2;  // with two turns: one possible window
    cfg.rng_seed = 5;
    const NetworkParams init = NetworkParams::zero_init(1);
    const TrainResult a = train({scan}, sc.geom, sc.partition, sc.spec, init, cfg);
    const TrainResult b = train({scan}, sc.geom, sc.partition, sc.spec, init, cfg);
    CHECK(a.loss_trace == b.loss_trace);
    REQUIRE(a.loss_trace.size() == 3);

    // step 0 starts from the zero volume on the only possible window
    const WindowView w = make_window(sc.geom, sc.partition, sc.spec, 0, 2);
    Volume zero(w.window_spec()), grad(w.window_spec());
    const double expect = window_loss(zero, scan.truth, w.slice_begin, grad);
    CHECK(a.loss_trace[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("a short training run reduces the loss on a noise-free scan") {
    const Scene sc = small_scene(2.2, 19);
    PhantomSpec ps = random_phantom(22, sc.spec);
    TrainScan scan;
    scan.truth = hu_to_mu(make_phantom(ps));
    scan.g = forward_project(scan.truth, sc.geom);

    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.window = 1;
    cfg.lr0 = 1e-3;
    cfg.rng_seed = 1;
    NetworkParams init = NetworkParams::default_init(1, 7);
    init.op_scale = 1.0 / estimate_op_norm(sc.geom, sc.spec, 15);
    int calls = 0;
    const TrainResult r = train({scan}, sc.geom, sc.partition, sc.spec, init, cfg,
                                [&](int, double, double) { ++calls; });
    CHECK(calls == cfg.iterations);
    const auto mean = [&](int b, int e) {
        return std::accumulate(r.loss_trace.begin() + b, r.loss_trace.begin() + e, 0.0) /
               (e - b);
    };
    CHECK(mean(260, 300) < 0.5 * mean(0, 40));
}

}  // TEST_SUITE
