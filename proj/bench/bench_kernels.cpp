// Serial reference vs OpenMP kernels: projector, backprojector, conv block.
#include <benchmark/benchmark.h>

#include "hct/geometry.hpp"
#include "hct/nn.hpp"
#include "hct/parallel.hpp"
#include "hct/projector.hpp"
#include "hct/rng.hpp"

namespace {

struct Fixture {
    hct::HelicalGeometry geom;
    hct::VolumeSpec spec;
    hct::Volume f;
    hct::Sinogram u;

    Fixture() {
        hct::DetectorSpec det{48, 8, 4.0, 6.0};
        geom = hct::build_geometry(2.0 * 3.14159265358979 / 48, {16.0}, 4.0, 300.0, 600.0,
                                   det, 0.0);
        spec.width = spec.height = 48;
        spec.num_slices = 24;
        spec.dx = spec.dy = 2.5;
        spec.dz = 4.0;
        spec.z_origin = 0.0;
        f = hct::Volume(spec);
        u = hct::Sinogram(geom.num_angles(), det.num_rows, det.num_cols);
        hct::CounterRng rng(1, 0);
        for (double& v : f.data) v = rng.next_uniform(0.0, 1.0);
        for (double& v : u.data) v = rng.next_uniform(0.0, 1.0);
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

void forward_serial(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(hct::forward_project_ref(fx().f, fx().geom));
}
void forward_parallel(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(hct::forward_project(fx().f, fx().geom));
}
void backward_serial(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(hct::back_project_ref(fx().u, fx().geom, fx().spec));
}
void backward_parallel(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(hct::back_project(fx().u, fx().geom, fx().spec));
}

void conv_serial(benchmark::State& state) {
    hct::Conv3dParams p(1, 32);
    hct::CounterRng rng(2, 0);
    for (double& w : p.weights) w = rng.next_uniform(-0.2, 0.2);
    hct::ChannelRaster in(1, 16, 48, 48), out(32, 16, 48, 48);
    for (double& v : in.data) v = rng.next_uniform(-1.0, 1.0);
    for (auto _ : state) {
        hct::conv3d_forward_ref(p, in, out, true);
        benchmark::DoNotOptimize(out.data.data());
    }
}
void conv_blas(benchmark::State& state) {
    hct::Conv3dParams p(1, 32);
    hct::CounterRng rng(2, 0);
    for (double& w : p.weights) w = rng.next_uniform(-0.2, 0.2);
    hct::ChannelRaster in(1, 16, 48, 48), out(32, 16, 48, 48);
    for (double& v : in.data) v = rng.next_uniform(-1.0, 1.0);
    for (auto _ : state) {
        hct::conv3d_forward(p, in, out, true);
        benchmark::DoNotOptimize(out.data.data());
    }
}

BENCHMARK(forward_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(forward_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(backward_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(backward_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(conv_blas)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
