#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hct/geometry.hpp"

using namespace hct;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

HelicalGeometry small_geom(double pitch = 12.0, double turns = 3.0, int per_turn = 24) {
    DetectorSpec det{12, 6, 3.0, 3.0};
    return build_geometry(kTwoPi / per_turn, {pitch}, turns, 60.0, 120.0, det, 0.0);
}

VolumeSpec small_vol() {
    VolumeSpec v;
    v.width = v.height = 10;
    v.num_slices = 24;
    v.dx = v.dy = 2.0;
    v.dz = 2.0;
    v.z_origin = 0.0;
    return v;
}
}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("build_geometry samples angles and z uniformly at constant pitch") {
    const HelicalGeometry g = small_geom(12.0, 2.0, 24);
    CHECK(g.num_angles() == 48);
    CHECK(g.angles[0] == 0.0);
    CHECK(g.angles[1] == doctest::Approx(kTwoPi / 24).epsilon(1e-14));
    // table moves one pitch per 2*pi
    CHECK(g.z_offsets[24] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(g.z_offsets[47] - g.z_offsets[46] ==
          doctest::Approx(12.0 / 24).epsilon(1e-12));
}

TEST_CASE("build_geometry applies per-turn pitches") {
    DetectorSpec det{8, 4, 2.0, 2.0};
    const HelicalGeometry g = build_geometry(kTwoPi / 8, {8.0, 16.0}, 2.0, 50.0, 100.0, det);
    CHECK(g.z_offsets[8] == doctest::Approx(8.0));
    CHECK(g.z_offsets[15] - g.z_offsets[8] == doctest::Approx(16.0 * 7.0 / 8.0));
}

TEST_CASE("source positions lie on the cylinder and the detector is centered") {
    const HelicalGeometry g = small_geom();
    for (int i : {0, 5, 20}) {
        const Vec3 s = source_position(g, i);
        CHECK(std::hypot(s.x, s.y) == doctest::Approx(60.0).epsilon(1e-12));
        // detector center sits SDD from the source on the ray through the axis
        const Vec3 mid = 0.5 * (detector_cell_position(g, i, 5, 2) +
                                detector_cell_position(g, i, 6, 3));
        const Vec3 d = mid - s;
        CHECK(std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z) ==
              doctest::Approx(120.0).epsilon(1e-12));
        // the central column's in-plane direction passes through the axis
        CHECK(s.x * d.y - s.y * d.x == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("detector columns increase along +x at phi = 0") {
    const HelicalGeometry g = small_geom();
    const Vec3 a = detector_cell_position(g, 0, 0, 0);
    const Vec3 b = detector_cell_position(g, 0, 11, 0);
    CHECK(b.x > a.x);
    CHECK(b.y == doctest::Approx(a.y).epsilon(1e-12));
    // rows run along +z
    const Vec3 c = detector_cell_position(g, 0, 0, 5);
    CHECK(c.z > a.z);
    CHECK(c.x == doctest::Approx(a.x).epsilon(1e-12));
}

TEST_CASE("ray_slice_extent brackets a hand-traced axial ray") {
    VolumeSpec v = small_vol();
    // horizontal ray through slice plane z = 10 -> fz = 5
    const Vec3 src{0.0, -60.0, 10.0}, det{0.0, 60.0, 10.0};
    const auto [lo, hi] = ray_slice_extent(src, det, v);
    CHECK(lo == 5);
    CHECK(hi == 7);  // floor(5)+2: trilinear support of the plane z = 10
}

TEST_CASE("ray_slice_extent is empty for rays missing the volume") {
    VolumeSpec v = small_vol();
    const auto [lo, hi] = ray_slice_extent({200.0, 0.0, 0.0}, {200.0, 1.0, 0.0}, v);
    CHECK(lo >= hi);
}

TEST_CASE("partition_turns splits complete turns and discards the tail") {
    const HelicalGeometry g = small_geom(12.0, 2.5, 24);
    const VolumeSpec v = small_vol();
    const int nt = min_subvolume_thickness(g, v);
    const TurnPartition p = partition_turns(g, v, nt);
    CHECK(p.num_turns() == 2);
    CHECK(p.turn_ranges[0] == IndexRange{0, 24});
    CHECK(p.turn_ranges[1] == IndexRange{24, 48});
    CHECK(p.tail_discard == IndexRange{48, g.num_angles()});
    CHECK(p.head_discard == IndexRange{0, 0});
    CHECK(p.subvolume_thickness == nt);
    CHECK(nt % 2 == 1);
}

TEST_CASE("turn centers track the mean source z") {
    const HelicalGeometry g = small_geom(12.0, 3.0, 24);
    const VolumeSpec v = small_vol();
    const TurnPartition p = partition_turns(g, v, min_subvolume_thickness(g, v));
    // turn 0 spans z 0..12 (exclusive), mean just below 6 -> slice 3 at dz = 2
    CHECK(p.subvolume_centers[0] == 3);
    // consecutive centers advance by one pitch = 6 slices
    for (int j = 1; j < p.num_turns(); ++j)
        CHECK(p.subvolume_centers[j] - p.subvolume_centers[j - 1] == 6);
}

TEST_CASE("partition_turns rejects slabs thinner than the cone coverage") {
    const HelicalGeometry g = small_geom();
    const VolumeSpec v = small_vol();
    const int nt = min_subvolume_thickness(g, v);
    CHECK_THROWS_AS(partition_turns(g, v, nt - 2), std::invalid_argument);
    CHECK_NOTHROW(partition_turns(g, v, nt));
}

TEST_CASE("every turn ray stays inside its slab (independent recheck)") {
    const HelicalGeometry g = small_geom();
    const VolumeSpec v = small_vol();
    const TurnPartition p = partition_turns(g, v, min_subvolume_thickness(g, v));
    for (int j = 0; j < p.num_turns(); ++j) {
        const auto [lo, hi] = p.subvolume_ranges[j];
        for (int i = p.turn_ranges[j].first; i < p.turn_ranges[j].second; ++i) {
            const Vec3 src = source_position(g, i);
            for (int c = 0; c < g.detector.num_cols; ++c)
                for (int r = 0; r < g.detector.num_rows; ++r) {
                    const auto [rl, rh] = ray_slice_extent(
                        src, detector_cell_position(g, i, c, r), v);
                    if (rl >= rh) continue;
                    CHECK(rl >= lo);
                    CHECK(rh <= hi);
                }
        }
    }
}

TEST_CASE("geometry JSON round trip preserves the digest") {
    const HelicalGeometry g = small_geom();
    const HelicalGeometry h = geometry_from_json(geometry_to_json(g));
    CHECK(geometry_digest(g) == geometry_digest(h));
    CHECK(h.angles == g.angles);
    CHECK(h.z_offsets == g.z_offsets);
    CHECK(h.detector.num_cols == g.detector.num_cols);
}

TEST_CASE("validation rejects malformed geometries") {
    HelicalGeometry g = small_geom();
    g.angles[1] = g.angles[0];
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    HelicalGeometry h = small_geom();
    h.source_detector_distance = h.source_radius;
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}

}  // TEST_SUITE
