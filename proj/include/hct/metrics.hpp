#pragma once

#include <string>
#include <vector>

#include "hct/geometry.hpp"
#include "hct/types.hpp"

namespace hct {

struct EvalReport {
    double psnr = 0.0;  // dB; +inf sentinel when the volumes are identical
    double ssim = 0.0;  // mean over retained slices
    std::vector<double> slice_rmse;       // per retained slice
    int retained_begin = 0, retained_end = 0;  // slice index range [begin, end)
    std::vector<int> turn_start_slices;   // sub-volume boundary markers
    std::string ssim_protocol = "2d-per-slice-mean";
};

// Metrics on slices [discard, N_z - discard): PSNR with range = max - min of
// the ground truth, mean 2D SSIM (11x11 Gaussian window, sigma 1.5,
// K1 = 0.01, K2 = 0.03), per-slice RMSE.
EvalReport evaluate(const Volume& recon, const Volume& truth, int discard = 10);

// Mean SSIM over 2D slices of equal shape; range fixed by the caller.
double ssim_2d(const double* a, const double* b, int height, int width, double range);

// Mean slice RMSE over turns beyond the first train_turns divided by the
// mean over the first train_turns. Slices are assigned to the turn with the
// nearest slab center (ties to the lower turn).
double slice_rmse_stability(const EvalReport& report, const TurnPartition& partition,
                            int train_turns = 3);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_to_csv(const EvalReport& report);  // slice_index,rmse

}  // namespace hct
