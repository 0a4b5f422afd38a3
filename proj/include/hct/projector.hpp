#pragma once

#include "hct/geometry.hpp"
#include "hct/types.hpp"

namespace hct {

// Restriction of the ray transform to one turn's angles and slab.
struct TurnRestriction {
    TurnPartition partition;
    int turn_index = 0;  // 0-based

    void validate() const {
        if (turn_index < 0 || turn_index >= partition.num_turns())
            throw std::invalid_argument("TurnRestriction: turn index out of range");
    }
};

// Spec of the slab of slices assigned to turn j.
VolumeSpec subvolume_spec(const VolumeSpec& full, const TurnPartition& partition, int j);

// Ray transform A: Joseph-style trilinear-interpolated line integrals,
// sampled along the dominant in-plane axis, scaled by physical step length.
// Rays missing the volume yield 0.
Sinogram forward_project(const Volume& f, const HelicalGeometry& geom);

// Exact algebraic adjoint A* of forward_project.
Volume back_project(const Sinogram& u, const HelicalGeometry& geom, const VolumeSpec& spec);

// A^j: rows of A for turn j applied to the turn's slab. f_sub must live on
// subvolume_spec(full, partition, j).
Sinogram forward_project_turn(const Volume& f_sub, const TurnRestriction& restriction,
                              const HelicalGeometry& geom);

// (A^j)*: exact adjoint of forward_project_turn.
Volume back_project_turn(const Sinogram& u_chunk, const TurnRestriction& restriction,
                         const HelicalGeometry& geom, const VolumeSpec& full_spec);

// P_X^j / zero-padding adjoint between full volume and slab.
Volume project_image(const Volume& f, const TurnPartition& partition, int j);
Volume pad_image(const Volume& f_sub, const TurnPartition& partition, int j,
                 const VolumeSpec& full_spec);

// P_Y^j / zero-padding adjoint between full sinogram and turn chunk.
Sinogram project_data(const Sinogram& g, const TurnPartition& partition, int j);
Sinogram pad_data(const Sinogram& chunk, const TurnPartition& partition, int j,
                  int full_num_angles);

// Serial reference implementations, kept for testing and benchmarking.
Sinogram forward_project_ref(const Volume& f, const HelicalGeometry& geom);
Volume back_project_ref(const Sinogram& u, const HelicalGeometry& geom, const VolumeSpec& spec);

// Range-restricted variants used internally and by FBP; angle indices
// [angle_begin, angle_end) of geom, output indexed from 0.
Sinogram forward_project_range(const Volume& f, const HelicalGeometry& geom,
                               int angle_begin, int angle_end);
Volume back_project_range(const Sinogram& u, const HelicalGeometry& geom,
                          int angle_begin, int angle_end, const VolumeSpec& spec);

// Test hook: when enabled, back-projection weights are slightly perturbed so
// adjoint checks must fail. Used by fault-injection tests only.
void set_adjoint_fault_injection(bool enabled);

}  // namespace hct
