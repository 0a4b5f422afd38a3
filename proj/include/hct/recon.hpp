#pragma once

#include <string>
#include <vector>

#include "hct/geometry.hpp"
#include "hct/ilpdh.hpp"
#include "hct/nn.hpp"
#include "hct/types.hpp"

namespace hct {

struct ReconConfig {
    int unrolled_iterations = 1;  // M
    enum class InitMode { kZeros, kFbp };
    InitMode init_mode = InitMode::kZeros;
    enum class Precision { kDouble, kSingle };
    Precision precision = Precision::kDouble;  // kSingle rounds the output to f32

    void validate() const {
        if (unrolled_iterations < 1)
            throw std::invalid_argument("ReconConfig: unrolled iterations must be >= 1");
    }
};

struct TrainConfig {
    int iterations = 5000;
    int batch_size = 1;
    double lr0 = 5e-4;
    int window = 3;  // consecutive turns per sample (1 or 3 in the shipped presets)
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
        if (window < 1) throw std::invalid_argument("TrainConfig: window must be >= 1");
        if (lr0 <= 0) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
    }
};

// Per-turn gluing weights: w_{z,j} = 1/|z - z_c^j| inside |z - z_c^j| <= z_t^j/2,
// 0 outside, normalized to sum to 1 per slice.
struct GluingWeights {
    std::vector<int> centers;      // z_c^j, slice indices
    std::vector<int> thicknesses;  // z_t^j, odd slice counts

    void validate() const {
        if (centers.size() != thicknesses.size())
            throw std::invalid_argument("GluingWeights: mismatched lengths");
        for (int t : thicknesses)
            if (t < 1 || t % 2 == 0)
                throw std::invalid_argument("GluingWeights: thicknesses must be odd and >= 1");
    }
};

// Unnormalized gluing weight of a partial centered at z_c with thickness z_t,
// evaluated at slice z. Infinite at the center slice; callers resolve the
// limit by letting exact-center partials take the whole slice.
double gluing_weight(int z, int z_c, int z_t);

// Runs the unrolled network over the whole scan (all turns). Returns the
// primal volume on the union of the per-turn slabs; slices outside it are
// not reconstructed.
Volume ilpdh_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                         const TurnPartition& partition, const VolumeSpec& spec,
                         const NetworkParams& params, const ReconConfig& cfg);

// Unsplit variant on the full operators: dual/primal updates use A and A*
// on the whole volume and all angles at once. Oracle path for the
// single-turn degeneracy check.
Volume ilpd_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                        const VolumeSpec& spec, const NetworkParams& params,
                        const ReconConfig& cfg);

// One overlapping partial reconstruction on the target grid: vol's slice k
// is target slice slice_begin + k.
struct GluePartial {
    Volume vol;
    int slice_begin = 0;
    int z_c = 0;  // center, target slice index
    int z_t = 0;  // thickness in slices
};

// Per-slice weighted average of overlapping partials. Every target slice
// must receive positive total weight.
Volume glue(const std::vector<GluePartial>& partials, const VolumeSpec& target);

// Sliding-window variant: reconstructs every window of `window` consecutive
// turns (stride 1) and glues the partials, each weighted from the center of
// its window's slab union.
Volume g_ilpdh_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                           const TurnPartition& partition, const VolumeSpec& spec,
                           const NetworkParams& params, const ReconConfig& cfg, int window);

// Approximate analytic reconstruction: Tam-Danielsson windowing, cosine
// weighting, Hann-apodized ramp filter cut at bandwidth_fraction of Nyquist,
// FDK-style distance-weighted backprojection.
Volume fbp_reconstruct(const Sinogram& g, const HelicalGeometry& geom, const VolumeSpec& spec,
                       double bandwidth_fraction = 0.45);

struct HuberConfig {
    double lambda = 0.15;
    double theta = 0.0012;
    int iterations = 20;
};

// 0.5*||Af - g||^2 + lambda * sum H_theta(|grad f|)
double huber_objective(const Volume& f, const Sinogram& g, const HelicalGeometry& geom,
                       const HuberConfig& cfg);
Volume huber_gradient(const Volume& f, const Sinogram& g, const HelicalGeometry& geom,
                      const HuberConfig& cfg);

// Piecewise Huber penalty of a scalar magnitude.
double huber_penalty(double t, double theta);

// Nesterov accelerated gradient with restart on objective increase; step
// size 1/L with L from power iteration on A*A plus the smoothed-TV bound.
// Aborts after 3 consecutive objective increases.
Volume huber_reconstruct(const Sinogram& g, const HelicalGeometry& geom, const VolumeSpec& spec,
                         const HuberConfig& cfg = {},
                         std::vector<double>* objective_trace = nullptr);

// JSON (de)serialization of the reconstruction/training configs used by the
// preset files.
struct MethodConfig {
    std::string method;  // "ilpdh" | "g-ilpdh" | "fbp" | "huber"
    ReconConfig recon;
    TrainConfig train;
    HuberConfig huber;
    double fbp_bandwidth_fraction = 0.45;
};

MethodConfig method_config_from_json(const std::string& text);
std::string method_config_to_json(const MethodConfig& cfg);

}  // namespace hct
