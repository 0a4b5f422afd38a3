#pragma once

#include <functional>
#include <vector>

#include "hct/recon.hpp"

namespace hct {

// One training scan: ground-truth attenuation volume plus its simulated data
// and turn partition on a shared geometry.
struct TrainScan {
    Volume truth;  // attenuation [mm^-1], full grid
    Sinogram g;    // linearized noisy data, all angles
};

struct TrainResult {
    NetworkParams params;
    std::vector<double> loss_trace;  // one entry per optimizer step
};

// Per-step progress callback: (step index, loss, learning rate).
using TrainCallback = std::function<void(int, double, double)>;

// Unrolled-network training: per step, draw a scan and a window start
// uniformly, run the forward pass on that window, take the mean-squared
// error against the ground truth restricted to the window slab, backprop
// through the inverse blocks, and apply one Adam step with cosine-annealed
// learning rate.
TrainResult train(const std::vector<TrainScan>& scans, const HelicalGeometry& geom,
                  const TurnPartition& partition, const VolumeSpec& spec,
                  const NetworkParams& init, const TrainConfig& cfg,
                  const TrainCallback& progress = nullptr);

// Loss and gradient of one sample window (exposed for testing).
double window_loss(const Volume& f, const Volume& truth, int slice_begin, Volume& grad_out);

}  // namespace hct
