#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hct/geometry.hpp"
#include "hct/types.hpp"

namespace hct {

// X-ray attenuation of water at the mean X-ray energy [1/mm].
inline constexpr double kMuWater = 0.0192;

struct Ellipsoid {
    double cx = 0, cy = 0, cz = 0;   // center [mm]
    double ax = 1, ay = 1, az = 1;   // semi-axes [mm]
    double rotation = 0;             // in-plane rotation about z [rad]
    double value_hu = 0;             // additive HU contribution inside
};

struct PhantomSpec {
    std::uint64_t rng_seed = 0;
    VolumeSpec volume;
    std::vector<Ellipsoid> ellipsoids;
    double background_hu = 0;

    void validate() const;
};

struct DoseModel {
    double photons_per_pixel = 1e4;  // H_0; the default is a low-dose scan
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (photons_per_pixel < 1)
            throw std::invalid_argument("DoseModel: photons_per_pixel must be >= 1");
    }
};

// Affine HU -> attenuation rescale: mu = (hu/1000 + 1) * kMuWater.
Volume hu_to_mu(const Volume& f_hu);

// Rasterizes the ellipsoid scene over the background.
Volume make_phantom(const PhantomSpec& spec);

// Draws a body ellipsoid plus internal contrast ellipsoids from documented
// uniform ranges; deterministic per seed.
PhantomSpec random_phantom(std::uint64_t seed, const VolumeSpec& volume);

// Low-dose data simulation: per-cell Poisson(H_0 exp(-A f)) counts, clamped
// to >= 1 photon, then linearized g = -ln(counts / H_0). Seeded per cell, so
// parallel generation is deterministic.
Sinogram simulate_data(const Volume& f_mu, const HelicalGeometry& geom, const DoseModel& dose);

// Keeps the maximal contiguous angle range whose rays, while laterally
// inside the volume, stay within its z extent.
HelicalGeometry truncate_trajectory(const HelicalGeometry& geom, const VolumeSpec& vol);

std::string phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const std::string& text);

}  // namespace hct
