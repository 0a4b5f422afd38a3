#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "hct/geometry.hpp"
#include "hct/projector.hpp"
#include "hct/simulation.hpp"

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
}  // namespace

TEST_SUITE("simulation") {

TEST_CASE("hu_to_mu maps water to mu0 and air to zero") {
    Volume f(grid(2, 1, 1.0));
    f.data = {0.0, -1000.0, 1000.0, 500.0};
    const Volume mu = hu_to_mu(f);
    CHECK(mu.data[0] == doctest::Approx(0.0192).epsilon(1e-14));
    CHECK(mu.data[1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(mu.data[2] == doctest::Approx(2 * 0.0192).epsilon(1e-14));
    CHECK(mu.data[3] == doctest::Approx(1.5 * 0.0192).epsilon(1e-14));
}

TEST_CASE("make_phantom rasterizes an ellipsoid additively over the background") {
    PhantomSpec spec;
    spec.volume = grid(9, 9, 1.0, -4.0);  // centered at the origin
    spec.background_hu = -1000.0;
    Ellipsoid e;
    e.ax = e.ay = e.az = 2.1;
    e.value_hu = 1050.0;
    spec.ellipsoids.push_back(e);
    const Volume v = make_phantom(spec);
    CHECK(v.at(4, 4, 4) == doctest::Approx(50.0));     // center: inside
    CHECK(v.at(4, 4, 6) == doctest::Approx(50.0));     // 2 < 2.1 along x
    CHECK(v.at(4, 4, 7) == doctest::Approx(-1000.0));  // 3 > 2.1
    CHECK(v.at(0, 0, 0) == doctest::Approx(-1000.0));
}

TEST_CASE("ellipsoid rotation moves the long axis as expected") {
    PhantomSpec spec;
    spec.volume = grid(11, 1, 1.0);
    Ellipsoid e;
    e.ax = 4.0;
    e.ay = 1.0;
    e.az = 10.0;
    e.value_hu = 100.0;
    e.rotation = std::numbers::pi / 2;  // long axis now along y
    spec.ellipsoids.push_back(e);
    const Volume v = make_phantom(spec);
    CHECK(v.at(0, 5, 8) == 0.0);    // +3 along x: outside after rotation
    CHECK(v.at(0, 8, 5) == 100.0);  // +3 along y: inside
}

TEST_CASE("random phantoms are deterministic per seed and valid") {
    const VolumeSpec vol = grid(16, 12, 2.0);
    const PhantomSpec a = random_phantom(11, vol);
    const PhantomSpec b = random_phantom(11, vol);
    CHECK(phantom_spec_to_json(a) == phantom_spec_to_json(b));
    const PhantomSpec c = random_phantom(12, vol);
    CHECK(phantom_spec_to_json(a) != phantom_spec_to_json(c));
    CHECK_NOTHROW(a.validate());
    CHECK(a.ellipsoids.size() >= 4);  // body + at least 3 features
    // round trip through JSON
    const PhantomSpec r = phantom_spec_from_json(phantom_spec_to_json(a));
    CHECK(phantom_spec_to_json(r) == phantom_spec_to_json(a));
}

TEST_CASE("simulated data is deterministic per seed") {
    const VolumeSpec vol = grid(8, 8, 2.0, 0.0);
    PhantomSpec ps = random_phantom(3, vol);
    const Volume mu = hu_to_mu(make_phantom(ps));
    DetectorSpec det{10, 4, 4.0, 4.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 12, {8.0}, 1.0, 50.0, 100.0, det, 4.0);
    DoseModel dose;
    dose.rng_seed = 5;
    const Sinogram g1 = simulate_data(mu, geom, dose);
    const Sinogram g2 = simulate_data(mu, geom, dose);
    CHECK(g1.data == g2.data);
    dose.rng_seed = 6;
    CHECK(simulate_data(mu, geom, dose).data != g1.data);
}

// Monte-Carlo consistency: at high dose the cellwise mean of the linearized
// data converges to the noise-free line integrals.
TEST_CASE("linearized data is unbiased at high dose") {
    const VolumeSpec vol = grid(6, 6, 2.0, 0.0);
    Volume mu(vol);
    for (std::size_t i = 0; i < mu.data.size(); ++i) mu.data[i] = 0.02;
    DetectorSpec det{6, 3, 4.0, 4.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 6, {6.0}, 1.0, 50.0, 100.0, det, 3.0);
    const Sinogram clean = forward_project(mu, geom);

    const int trials = 400;
    DoseModel dose;
    dose.photons_per_pixel = 1e8;
    Sinogram sum(clean.num_angles, clean.num_rows, clean.num_cols);
    for (int t = 0; t < trials; ++t) {
        dose.rng_seed = 1000 + t;
        const Sinogram g = simulate_data(mu, geom, dose);
        for (std::size_t i = 0; i < g.size(); ++i) sum.data[i] += g.data[i];
    }
    int ok = 0, total = 0;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        const double mean = sum.data[i] / trials;
        // var of -ln(N/H0) ~ 1/(H0 exp(-Af)) by the delta method
        const double se = std::sqrt(std::exp(clean.data[i]) / 1e8 / trials);
        ++total;
        if (std::abs(mean - clean.data[i]) <= 4.0 * se + 1e-12) ++ok;
    }
    CHECK(double(ok) / total >= 0.97);
}

TEST_CASE("nonphysical attenuation is rejected") {
    const VolumeSpec vol = grid(6, 6, 2.0, 0.0);
    Volume mu(vol);
    for (double& v : mu.data) v = 100.0;  // exp(-Af) underflows
    DetectorSpec det{6, 3, 4.0, 4.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 6, {6.0}, 1.0, 50.0, 100.0, det, 3.0);
    CHECK_THROWS(simulate_data(mu, geom, DoseModel{}));
}

TEST_CASE("truncate_trajectory keeps exactly the fully-covered angles") {
    const VolumeSpec vol = grid(8, 8, 2.0, 0.0);  // z centers 0..14
    DetectorSpec det{10, 4, 4.0, 4.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 16, {8.0}, 3.0, 50.0, 100.0, det, -6.0);
    const HelicalGeometry kept = truncate_trajectory(geom, vol);
    CHECK(kept.num_angles() > 0);
    CHECK(kept.num_angles() < geom.num_angles());

    // independent brute-force recheck of the containment predicate
    auto covered = [&](const HelicalGeometry& g, int i) {
        const double hx = vol.width * vol.dx / 2.0, hy = hx;
        const double zl = vol.z_origin - vol.dz / 2.0;
        const double zh = vol.z_origin + (vol.num_slices - 0.5) * vol.dz;
        const Vec3 s = source_position(g, i);
        for (int c = 0; c < g.detector.num_cols; ++c)
            for (int r : {0, g.detector.num_rows - 1}) {
                const Vec3 d = detector_cell_position(g, i, c, r) - s;
                double t0 = 0, t1 = 1;
                for (auto [p, dd, lo, hi] :
                     {std::tuple{s.x, d.x, -hx, hx}, std::tuple{s.y, d.y, -hy, hy}}) {
                    if (std::abs(dd) < 1e-300) continue;
                    double ta = (lo - p) / dd, tb = (hi - p) / dd;
                    if (ta > tb) std::swap(ta, tb);
                    t0 = std::max(t0, ta);
                    t1 = std::min(t1, tb);
                }
                if (t0 >= t1) continue;
                const double za = s.z + t0 * d.z, zb = s.z + t1 * d.z;
                if (std::min(za, zb) < zl || std::max(za, zb) > zh) return false;
            }
        return true;
    };
    for (int i = 0; i < kept.num_angles(); ++i) CHECK(covered(kept, i));
    // the angles flanking the kept range are not fully covered
    int first = -1;
    for (int i = 0; i < geom.num_angles(); ++i)
        if (geom.angles[i] == kept.angles.front()) first = i;
    REQUIRE(first >= 0);
    if (first > 0) CHECK_FALSE(covered(geom, first - 1));
    const int last = first + kept.num_angles() - 1;
    if (last + 1 < geom.num_angles()) CHECK_FALSE(covered(geom, last + 1));
}

TEST_CASE("truncate_trajectory rejects a volume no angle covers") {
    const VolumeSpec vol = grid(8, 8, 2.0, 1000.0);
    DetectorSpec det{10, 4, 4.0, 4.0};
    const HelicalGeometry geom =
        build_geometry(kTwoPi / 8, {8.0}, 1.0, 50.0, 100.0, det, 0.0);
    CHECK_THROWS(truncate_trajectory(geom, vol));
}

}  // TEST_SUITE
