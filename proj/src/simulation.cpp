#include "hct/simulation.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "hct/parallel.hpp"
#include "hct/projector.hpp"
#include "hct/rng.hpp"

namespace hct {

void PhantomSpec::validate() const {
    volume.validate();
    for (const auto& e : ellipsoids) {
        if (e.ax <= 0 || e.ay <= 0 || e.az <= 0)
            throw std::invalid_argument("PhantomSpec: semi-axes must be > 0");
        if (!std::isfinite(e.value_hu))
            throw std::invalid_argument("PhantomSpec: attenuation values must be finite");
    }
    if (!std::isfinite(background_hu))
        throw std::invalid_argument("PhantomSpec: background must be finite");
}

Volume hu_to_mu(const Volume& f_hu) {
    Volume out(f_hu.spec);
    for (std::size_t i = 0; i < f_hu.data.size(); ++i)
        out.data[i] = (f_hu.data[i] / 1000.0 + 1.0) * kMuWater;
    return out;
}

Volume make_phantom(const PhantomSpec& spec) {
    spec.validate();
    const VolumeSpec& v = spec.volume;
    Volume out(v);

#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (int z = 0; z < v.num_slices; ++z) {
        const double pz = v.slice_z(z);
        for (int y = 0; y < v.height; ++y) {
            const double py = (y - (v.height - 1) / 2.0) * v.dy;
            for (int x = 0; x < v.width; ++x) {
                const double px = (x - (v.width - 1) / 2.0) * v.dx;
                double hu = spec.background_hu;
                for (const auto& e : spec.ellipsoids) {
                    const double rx = px - e.cx, ry = py - e.cy, rz = pz - e.cz;
                    const double c = std::cos(e.rotation), s = std::sin(e.rotation);
                    const double ex = c * rx + s * ry;
                    const double ey = -s * rx + c * ry;
                    const double q = (ex / e.ax) * (ex / e.ax) + (ey / e.ay) * (ey / e.ay) +
                                     (rz / e.az) * (rz / e.az);
                    if (q <= 1.0) hu += e.value_hu;
                }
                out.at(z, y, x) = hu;
            }
        }
    }
    return out;
}

PhantomSpec random_phantom(std::uint64_t seed, const VolumeSpec& volume) {
    volume.validate();
    CounterRng rng(seed, 0x70686e746dull);  // phantom stream
    PhantomSpec spec;
    spec.rng_seed = seed;
    spec.volume = volume;
    spec.background_hu = -1000.0;  // air

    const double half_w = volume.width * volume.dx / 2.0;
    const double half_h = volume.height * volume.dy / 2.0;
    const double lateral = std::min(half_w, half_h);
    const double z_lo = volume.z_origin;
    const double z_hi = volume.slice_z(volume.num_slices - 1);
    const double z_mid = (z_lo + z_hi) / 2.0;
    const double z_half = (z_hi - z_lo) / 2.0;

    // water-equivalent body cylinder spanning the full z range
    Ellipsoid body;
    body.ax = rng.next_uniform(0.72, 0.85) * lateral;
    body.ay = rng.next_uniform(0.72, 0.85) * lateral;
    body.az = 4.0 * std::max(z_half, volume.dz);
    body.cz = z_mid;
    body.value_hu = 1000.0;
    spec.ellipsoids.push_back(body);

    const int count = 3 + int(rng.next_below(5));  // 3..7 contrast features
    for (int i = 0; i < count; ++i) {
        Ellipsoid e;
        e.ax = rng.next_uniform(0.06, 0.28) * lateral;
        e.ay = rng.next_uniform(0.06, 0.28) * lateral;
        e.az = rng.next_uniform(0.05, 0.25) * std::max(z_hi - z_lo, volume.dz);
        const double rad = rng.next_uniform(0.0, 0.55) * lateral;
        const double ang = rng.next_uniform(0.0, 6.283185307179586);
        e.cx = rad * std::cos(ang);
        e.cy = rad * std::sin(ang);
        e.cz = rng.next_uniform(z_lo + 0.1 * z_half, z_hi - 0.1 * z_half);
        e.rotation = rng.next_uniform(0.0, 3.141592653589793);
        e.value_hu = rng.next_uniform(-400.0, 600.0);
        spec.ellipsoids.push_back(e);
    }
    return spec;
}

Sinogram simulate_data(const Volume& f_mu, const HelicalGeometry& geom, const DoseModel& dose) {
    dose.validate();
    Sinogram line_integrals = forward_project(f_mu, geom);
    const double h0 = dose.photons_per_pixel;
    Sinogram out(line_integrals.num_angles, line_integrals.num_rows, line_integrals.num_cols);
    out.geom_id = line_integrals.geom_id;

    for (double v : line_integrals.data)
        if (std::exp(-v) == 0.0)
            throw std::runtime_error("simulate_data: exp(-Af) underflows; nonphysical phantom");

#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(out.size()); ++i) {
        CounterRng rng(dose.rng_seed, std::uint64_t(i));
        const double mean = h0 * std::exp(-line_integrals.data[i]);
        const double counts = std::max<double>(1.0, double(rng.next_poisson(mean)));
        out.data[i] = -std::log(counts / h0);
    }
    return out;
}

HelicalGeometry truncate_trajectory(const HelicalGeometry& geom, const VolumeSpec& vol) {
    geom.validate();
    vol.validate();
    const double hx = vol.width * vol.dx / 2.0;
    const double hy = vol.height * vol.dy / 2.0;
    const double z_lo = vol.z_origin - vol.dz / 2.0;
    const double z_hi = vol.z_origin + (vol.num_slices - 0.5) * vol.dz;

    // For a fixed column the in-volume z extent is monotone in the row, so
    // the edge rows bound every ray of the fan.
    auto angle_ok = [&](int i) {
        const Vec3 src = source_position(geom, i);
        const int rows[2] = {0, geom.detector.num_rows - 1};
        for (int c = 0; c < geom.detector.num_cols; ++c) {
            for (int r : rows) {
                const Vec3 det = detector_cell_position(geom, i, c, r);
                const Vec3 d = det - src;
                double t0 = 0.0, t1 = 1.0;
                auto clip = [&](double p, double dd, double lo, double hi) {
                    if (std::abs(dd) < 1e-300) {
                        if (p < lo || p > hi) t0 = 1.0, t1 = 0.0;
                        return;
                    }
                    double ta = (lo - p) / dd, tb = (hi - p) / dd;
                    if (ta > tb) std::swap(ta, tb);
                    t0 = std::max(t0, ta);
                    t1 = std::min(t1, tb);
                };
                clip(src.x, d.x, -hx, hx);
                clip(src.y, d.y, -hy, hy);
                if (t0 >= t1) continue;  // misses the volume laterally
                const double za = src.z + t0 * d.z, zb = src.z + t1 * d.z;
                if (std::min(za, zb) < z_lo || std::max(za, zb) > z_hi) return false;
            }
        }
        return true;
    };

    int best_a = -1, best_b = -1;
    int a = -1;
    for (int i = 0; i <= geom.num_angles(); ++i) {
        const bool ok = i < geom.num_angles() && angle_ok(i);
        if (ok && a < 0) a = i;
        if (!ok && a >= 0) {
            if (i - a > best_b - best_a) {
                best_a = a;
                best_b = i;
            }
            a = -1;
        }
    }
    if (best_a < 0)
        throw std::runtime_error("truncate_trajectory: no source position qualifies");

    HelicalGeometry out = geom;
    out.angles.assign(geom.angles.begin() + best_a, geom.angles.begin() + best_b);
    out.z_offsets.assign(geom.z_offsets.begin() + best_a, geom.z_offsets.begin() + best_b);
    return out;
}

std::string phantom_spec_to_json(const PhantomSpec& spec) {
    nlohmann::json j;
    j["rng_seed"] = spec.rng_seed;
    j["volume"] = {{"width", spec.volume.width},     {"height", spec.volume.height},
                   {"num_slices", spec.volume.num_slices},
                   {"dx", spec.volume.dx},           {"dy", spec.volume.dy},
                   {"dz", spec.volume.dz},           {"z_origin", spec.volume.z_origin}};
    j["background_hu"] = spec.background_hu;
    j["ellipsoids"] = nlohmann::json::array();
    for (const auto& e : spec.ellipsoids) {
        j["ellipsoids"].push_back({{"center", {e.cx, e.cy, e.cz}},
                                   {"semi_axes", {e.ax, e.ay, e.az}},
                                   {"rotation", e.rotation},
                                   {"value_hu", e.value_hu}});
    }
    return j.dump(2);
}

PhantomSpec phantom_spec_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PhantomSpec spec;
    spec.rng_seed = j.value("rng_seed", std::uint64_t(0));
    const auto& v = j.at("volume");
    spec.volume.width = v.at("width").get<int>();
    spec.volume.height = v.at("height").get<int>();
    spec.volume.num_slices = v.at("num_slices").get<int>();
    spec.volume.dx = v.value("dx", 1.0);
    spec.volume.dy = v.value("dy", 1.0);
    spec.volume.dz = v.value("dz", 1.0);
    spec.volume.z_origin = v.value("z_origin", 0.0);
    spec.background_hu = j.value("background_hu", 0.0);
    for (const auto& je : j.value("ellipsoids", nlohmann::json::array())) {
        Ellipsoid e;
        const auto& c = je.at("center");
        e.cx = c[0];
        e.cy = c[1];
        e.cz = c[2];
        const auto& ax = je.at("semi_axes");
        e.ax = ax[0];
        e.ay = ax[1];
        e.az = ax[2];
        e.rotation = je.value("rotation", 0.0);
        e.value_hu = je.at("value_hu").get<double>();
        spec.ellipsoids.push_back(e);
    }
    spec.validate();
    return spec;
}

}  // namespace hct
