#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hct/types.hpp"

namespace hct {

// Helical source trajectory plus detector. Angles are stored unwrapped
// (cumulative, monotone increasing) so turn boundaries are well defined
// even with nonuniform angular sampling.
struct HelicalGeometry {
    std::vector<double> angles;     // unwrapped gantry angle [rad], length N_phi
    std::vector<double> z_offsets;  // source z [mm], nondecreasing, length N_phi
    double source_radius = 0.0;            // source-to-isocenter [mm]
    double source_detector_distance = 0.0; // source-to-detector [mm]
    DetectorSpec detector;

    int num_angles() const { return int(angles.size()); }
    void validate() const;
};

// Half-open index range [first, second).
using IndexRange = std::pair<int, int>;

// Split of the trajectory into complete 2*pi turns and of the image into
// per-turn slabs of thickness <= subvolume_thickness slices.
struct TurnPartition {
    std::vector<IndexRange> turn_ranges;       // angle-index ranges, one per turn
    IndexRange head_discard{0, 0};             // incomplete leading turn
    IndexRange tail_discard{0, 0};             // incomplete trailing turn
    std::vector<IndexRange> subvolume_ranges;  // slice-index ranges, one per turn
    std::vector<int> subvolume_centers;        // slice index z_c per turn
    int subvolume_thickness = 0;               // N_t (odd)

    int num_turns() const { return int(turn_ranges.size()); }
    int turn_num_angles(int j) const { return turn_ranges[j].second - turn_ranges[j].first; }
    int subvolume_num_slices(int j) const {
        return subvolume_ranges[j].second - subvolume_ranges[j].first;
    }
};

// Constructs a helix with the given angular increment. The pitch may vary
// per turn; z accumulates proportionally to the angle traversed.
HelicalGeometry build_geometry(double angular_increment,
                               const std::vector<double>& pitch_per_turn,
                               double num_turns_requested,
                               double source_radius,
                               double source_detector_distance,
                               const DetectorSpec& detector,
                               double z_start = 0.0);

// Source position on the helix: (R sin(phi), R cos(phi), z).
Vec3 source_position(const HelicalGeometry& geom, int angle_index);

// Center of detector cell (col, row). The detector plane is orthogonal to
// the source-isocenter ray at source_detector_distance from the source;
// columns run along the in-plane tangent (increasing col moves in +x at
// phi = 0), rows along +z.
Vec3 detector_cell_position(const HelicalGeometry& geom, int angle_index, int col, int row);

// Splits the trajectory into complete turns and assigns each turn a slab of
// num_thickness slices centered on the slice nearest the turn's mean source z.
// Fails if no complete turn exists or if some ray of a turn intersects the
// volume outside its slab (num_thickness too small for the pitch/detector).
TurnPartition partition_turns(const HelicalGeometry& geom, const VolumeSpec& vol,
                              int num_thickness);

// Minimal odd slab thickness for which partition_turns succeeds.
int min_subvolume_thickness(const HelicalGeometry& geom, const VolumeSpec& vol);

// Slice-index interval [lo, hi) of the voxels an aligned ray could touch
// while inside the volume, empty (lo >= hi) if the ray misses it.
IndexRange ray_slice_extent(const Vec3& src, const Vec3& det, const VolumeSpec& vol);

std::string geometry_to_json(const HelicalGeometry& geom);
HelicalGeometry geometry_from_json(const std::string& text);
std::string geometry_digest(const HelicalGeometry& geom);

}  // namespace hct
