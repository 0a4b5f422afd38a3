#pragma once

#include <optional>
#include <vector>

#include "hct/geometry.hpp"
#include "hct/nn.hpp"
#include "hct/projector.hpp"
#include "hct/types.hpp"

namespace hct {

// A contiguous window of turns of one scan: the unrolled network runs on the
// window's data chunks and the union of the corresponding slabs. A full
// reconstruction is simply the window spanning every turn.
struct WindowView {
    const HelicalGeometry* geom = nullptr;
    TurnPartition partition;  // partition of the full scan
    VolumeSpec full_spec;
    int first_turn = 0, num_turns = 0;
    int angle_begin = 0, angle_end = 0;  // union of the window's turn ranges
    int slice_begin = 0, slice_end = 0;  // union of the window's slabs

    VolumeSpec window_spec() const;
    int turn(int k) const { return first_turn + k; }
};

WindowView make_window(const HelicalGeometry& geom, const TurnPartition& partition,
                       const VolumeSpec& full_spec, int first_turn, int num_turns);

// Primal/dual state carried through the unrolled iterations: f on the window
// slab union, u on the window's angles.
struct LpdState {
    Volume f;
    Sinogram u;
};

LpdState zero_state(const WindowView& w);

// Runs the unrolled double loop (outer invertible half-steps, inner turns)
// in place. g must cover the window's angles, indexed from angle_begin.
void ilpdh_forward(LpdState& state, const Sinogram& g, const NetworkParams& params,
                   const WindowView& w);

// Same, snapshotting the state before every half-step (testing aid).
void ilpdh_forward_with_snapshots(LpdState& state, const Sinogram& g,
                                  const NetworkParams& params, const WindowView& w,
                                  std::vector<LpdState>& snapshots);

// Walks the blocks in reverse, reconstructing each block's input through the
// additive-coupling inverse, and accumulates parameter gradients. state must
// be the exact output of ilpdh_forward with the same inputs; it is restored
// to the initial state on return. Peak live activation memory stays bounded
// by one block. When check_states is given, the recomputed inputs are
// compared against the stored ones and the largest relative deviation is
// reported through max_drift.
GradientTape ilpdh_backward_invertible(LpdState& state, const Volume& loss_grad,
                                       const Sinogram& g, const NetworkParams& params,
                                       const WindowView& w,
                                       const std::vector<LpdState>* check_states = nullptr,
                                       double* max_drift = nullptr);

// Stored-activation reference backprop: runs its own forward pass from the
// given initial state, keeping every intermediate state, then walks backward
// without inversion. Kept for oracle tests.
GradientTape ilpdh_backward_reference(const LpdState& initial_state, const Volume& loss_grad,
                                      const Sinogram& g, const NetworkParams& params,
                                      const WindowView& w);

// Power-iteration estimate of ||A|| on the given grid (seeded, deterministic).
double estimate_op_norm(const HelicalGeometry& geom, const VolumeSpec& spec, int iters = 20,
                        std::uint64_t seed = 0);

}  // namespace hct
