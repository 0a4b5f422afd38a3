#include "hct/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "hct/parallel.hpp"
#include "hct/projector.hpp"

namespace hct {

namespace {

constexpr double kPi = std::numbers::pi;

void round_to_single(Volume& v) {
    for (double& x : v.data) x = double(float(x));
}

Sinogram extract_angle_range(const Sinogram& g, int begin, int end) {
    Sinogram out(end - begin, g.num_rows, g.num_cols);
    out.geom_id = g.geom_id;
    const std::size_t proj = std::size_t(g.num_rows) * g.num_cols;
    std::copy(g.data.begin() + begin * proj, g.data.begin() + end * proj, out.data.begin());
    return out;
}

Volume run_window(const Sinogram& g, const HelicalGeometry& geom,
                  const TurnPartition& partition, const VolumeSpec& spec,
                  const NetworkParams& params, const ReconConfig& cfg, int first_turn,
                  int num_turns) {
    const WindowView w = make_window(geom, partition, spec, first_turn, num_turns);
    LpdState state = zero_state(w);
    if (cfg.init_mode == ReconConfig::InitMode::kFbp)
        state.f = fbp_reconstruct(g, geom, w.window_spec());
    NetworkParams p = params;
    if (p.unrolled_iterations != cfg.unrolled_iterations)
        throw std::invalid_argument("ilpdh_reconstruct: config M does not match the checkpoint");
    const Sinogram g_window = extract_angle_range(g, w.angle_begin, w.angle_end);
    ilpdh_forward(state, g_window, p, w);
    if (cfg.precision == ReconConfig::Precision::kSingle) round_to_single(state.f);
    return std::move(state.f);
}

}  // namespace

Volume ilpdh_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                         const TurnPartition& partition, const VolumeSpec& spec,
                         const NetworkParams& params, const ReconConfig& cfg) {
    cfg.validate();
    if (g.num_angles != geom.num_angles())
        throw std::invalid_argument("ilpdh_reconstruct: data does not match the geometry");
    return run_window(g, geom, partition, spec, params, cfg, 0, partition.num_turns());
}

Volume ilpd_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                        const VolumeSpec& spec, const NetworkParams& params,
                        const ReconConfig& cfg) {
    cfg.validate();
    if (g.num_angles != geom.num_angles())
        throw std::invalid_argument("ilpd_reconstruct: data does not match the geometry");
    if (params.unrolled_iterations != cfg.unrolled_iterations)
        throw std::invalid_argument("ilpd_reconstruct: config M does not match the checkpoint");

    Volume f(spec);
    if (cfg.init_mode == ReconConfig::InitMode::kFbp) f = fbp_reconstruct(g, geom, spec);
    Sinogram u(g.num_angles, g.num_rows, g.num_cols);

    for (int i = 0; i < cfg.unrolled_iterations; ++i) {
        {
            const Sinogram af = forward_project(f, geom);
            ChannelRaster in(2, g.num_angles, g.num_rows, g.num_cols);
            for (std::size_t q = 0; q < af.size(); ++q) {
                in.data[q] = params.op_scale * af.data[q];
                in.data[af.size() + q] = g.data[q];
            }
            const ChannelRaster out = conv_block_forward(params.gamma[i], in);
            for (std::size_t q = 0; q < u.size(); ++q) u.data[q] += out.data[q];
        }
        {
            const Volume bp = back_project(u, geom, spec);
            ChannelRaster in(1, spec.num_slices, spec.height, spec.width);
            for (std::size_t q = 0; q < bp.data.size(); ++q)
                in.data[q] = params.op_scale * bp.data[q];
            const ChannelRaster out = conv_block_forward(params.lambda[i], in);
            for (std::size_t q = 0; q < f.data.size(); ++q) f.data[q] += out.data[q];
        }
    }
    if (cfg.precision == ReconConfig::Precision::kSingle) round_to_single(f);
    return f;
}

// ---- gluing ---------------------------------------------------------------

double gluing_weight(int z, int z_c, int z_t) {
    const int d = std::abs(z - z_c);
    if (2 * d > z_t) return 0.0;
    if (d == 0) return std::numeric_limits<double>::infinity();
    return 1.0 / d;
}

Volume glue(const std::vector<GluePartial>& partials, const VolumeSpec& target) {
    target.validate();
    for (const auto& p : partials) {
        if (p.vol.spec.width != target.width || p.vol.spec.height != target.height)
            throw std::invalid_argument("glue: partial in-plane shape mismatch");
        if (p.slice_begin < 0 || p.slice_begin + p.vol.spec.num_slices > target.num_slices)
            throw std::invalid_argument("glue: partial exceeds the target slice range");
    }

    Volume out(target);
    const std::size_t plane = std::size_t(target.height) * target.width;
    for (int z = 0; z < target.num_slices; ++z) {
        // Exact-center partials carry infinite weight: they split the slice
        // evenly among themselves and everything else drops out.
        double total = 0.0;
        bool has_center = false;
        int center_count = 0;
        for (const auto& p : partials) {
            if (z < p.slice_begin || z >= p.slice_begin + p.vol.spec.num_slices) continue;
            const double w = gluing_weight(z, p.z_c, p.z_t);
            if (std::isinf(w)) {
                has_center = true;
                ++center_count;
            } else {
                total += w;
            }
        }
        if (!has_center && total == 0.0)
            throw std::runtime_error("glue: slice " + std::to_string(z) +
                                     " receives zero total weight");
        double* dst = out.data.data() + z * plane;
        for (const auto& p : partials) {
            if (z < p.slice_begin || z >= p.slice_begin + p.vol.spec.num_slices) continue;
            double w = gluing_weight(z, p.z_c, p.z_t);
            if (has_center)
                w = std::isinf(w) ? 1.0 / center_count : 0.0;
            else
                w /= total;
            if (w == 0.0) continue;
            const double* src = p.vol.data.data() + (z - p.slice_begin) * plane;
            for (std::size_t q = 0; q < plane; ++q) dst[q] += w * src[q];
        }
    }
    return out;
}

Volume g_ilpdh_reconstruct(const Sinogram& g, const HelicalGeometry& geom,
                           const TurnPartition& partition, const VolumeSpec& spec,
                           const NetworkParams& params, const ReconConfig& cfg, int window) {
    cfg.validate();
    const int ns = partition.num_turns();
    if (window < 1 || window > ns)
        throw std::invalid_argument("g_ilpdh_reconstruct: window exceeds the turn count");

    std::vector<GluePartial> partials;
    int union_lo = spec.num_slices, union_hi = 0;
    for (int q = 0; q + window <= ns; ++q) {
        const WindowView w = make_window(geom, partition, spec, q, window);
        GluePartial p;
        p.vol = run_window(g, geom, partition, spec, params, cfg, q, window);
        p.slice_begin = w.slice_begin;
        p.z_c = (w.slice_begin + w.slice_end - 1) / 2;
        p.z_t = w.slice_end - w.slice_begin;
        union_lo = std::min(union_lo, w.slice_begin);
        union_hi = std::max(union_hi, w.slice_end);
        partials.push_back(std::move(p));
    }

    // Glue on the union of the window slabs, then restate on that grid.
    VolumeSpec target = spec;
    target.num_slices = union_hi - union_lo;
    target.z_origin = spec.z_origin + union_lo * spec.dz;
    for (auto& p : partials) p.slice_begin -= union_lo;
    for (auto& p : partials) p.z_c -= union_lo;
    return glue(partials, target);
}

// ---- FBP ------------------------------------------------------------------

namespace {

// Naive DFT-based ramp filtering of one detector row (desk-scale sizes).
struct RampFilter {
    int n = 0, padded = 0;
    std::vector<double> response;  // |nu| * Hann window, per DFT bin
    std::vector<double> cos_tab, sin_tab;

    RampFilter(int num_cols, double spacing, double bandwidth_fraction) {
        n = num_cols;
        padded = 1;
        while (padded < 4 * n) padded *= 2;
        // Band-limited spatial ramp kernel: sampling |nu| directly in frequency
        // biases the low frequencies and depresses wide objects' levels, so the
        // response is taken as the DFT of the exact kernel instead.
        std::vector<double> h(padded, 0.0);
        h[0] = 1.0 / (4.0 * spacing * spacing);
        for (int j = 1; j <= padded / 2; j += 2) {
            const double v = -1.0 / (kPi * kPi * j * j * spacing * spacing);
            h[j] = v;
            h[padded - j] = v;
        }
        response.assign(padded, 0.0);
        const double cut = bandwidth_fraction * 0.5;  // cycles per sample
        for (int k = 0; k < padded; ++k) {
            const double frac = double(std::min(k, padded - k)) / padded;
            if (frac > cut) continue;
            double re = 0.0;
            for (int j = 0; j < padded; ++j)
                re += h[j] * std::cos(2.0 * kPi * double(k) * j / padded);
            const double hann = 0.5 * (1.0 + std::cos(kPi * frac / cut));
            response[k] = re * spacing * hann;
        }
        cos_tab.resize(std::size_t(padded) * padded);
        sin_tab.resize(std::size_t(padded) * padded);
        for (int k = 0; k < padded; ++k)
            for (int j = 0; j < padded; ++j) {
                const double a = 2.0 * kPi * k * j / padded;
                cos_tab[std::size_t(k) * padded + j] = std::cos(a);
                sin_tab[std::size_t(k) * padded + j] = std::sin(a);
            }
    }

    void apply(double* row) const {
        std::vector<double> re(padded, 0.0), im(padded, 0.0);
        for (int k = 0; k < padded; ++k) {
            double sr = 0.0, si = 0.0;
            for (int j = 0; j < n; ++j) {
                sr += row[j] * cos_tab[std::size_t(k) * padded + j];
                si -= row[j] * sin_tab[std::size_t(k) * padded + j];
            }
            re[k] = sr * response[k];
            im[k] = si * response[k];
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < padded; ++k)
                s += re[k] * cos_tab[std::size_t(k) * padded + j] -
                     im[k] * sin_tab[std::size_t(k) * padded + j];
            row[j] = s / padded;
        }
    }
};

// Upper Tam-Danielsson boundary at detector coordinate u for local pitch h:
// the cone-beam projection of the helix one turn ahead.
double td_upper(double u, double sdd, double radius, double pitch) {
    const double phi = 2.0 * std::atan2(sdd, u);
    return sdd * pitch * phi / (2.0 * kPi * radius * (1.0 - std::cos(phi)));
}

// Smooth Tam-Danielsson weight: 1 inside, linear rolloff of one feather width
// centered on each boundary. A hard per-cell cut would lose part of the
// window to interpolation against zeroed neighbor rows and depress the
// absolute level; the rolloff plus per-voxel coverage normalization fixes it.
double td_weight(double u, double v, double sdd, double radius, double pitch, double feather) {
    if (pitch <= 0.0) return 0.0;
    const double hi = td_upper(u, sdd, radius, pitch);
    const double lo = -td_upper(-u, sdd, radius, pitch);
    const double a = std::min((hi - v) / feather + 0.5, 1.0);
    const double b = std::min((v - lo) / feather + 0.5, 1.0);
    return std::max(0.0, std::min(a, b));
}

}  // namespace

Volume fbp_reconstruct(const Sinogram& g, const HelicalGeometry& geom, const VolumeSpec& spec,
                       double bandwidth_fraction) {
    geom.validate();
    spec.validate();
    if (g.num_angles != geom.num_angles() || g.num_rows != geom.detector.num_rows ||
        g.num_cols != geom.detector.num_cols)
        throw std::invalid_argument("fbp_reconstruct: data does not match the geometry");

    const int na = g.num_angles, nr = g.num_rows, nc = g.num_cols;
    const double sdd = geom.source_detector_distance;
    const double radius = geom.source_radius;
    // Filter at the virtual isocenter detector (coordinates scaled by R/SDD).
    const double iso_du = geom.detector.col_spacing * radius / sdd;
    const RampFilter filter(nc, iso_du, bandwidth_fraction);

    // Weighted + windowed + row-filtered projections.
    // local pitch (table feed per 2*pi) at each source position
    std::vector<double> local_pitch(na);
    for (int i = 0; i < na; ++i) {
        const int i2 = std::min(i + 1, na - 1), i1 = i2 - 1;
        const double dphi = geom.angles[i2] - geom.angles[i1];
        local_pitch[i] =
            dphi > 0 ? (geom.z_offsets[i2] - geom.z_offsets[i1]) / dphi * 2.0 * kPi : 0.0;
    }
    const double feather = geom.detector.row_spacing;

    Sinogram q(na, nr, nc);
    bool any_window = false;
#pragma omp parallel for schedule(static) num_threads(num_threads()) reduction(||: any_window)
    for (int i = 0; i < na; ++i) {
        std::vector<double> row(nc);
        for (int r = 0; r < nr; ++r) {
            const double v = (r - (nr - 1) / 2.0) * geom.detector.row_spacing;
            for (int c = 0; c < nc; ++c) {
                const double u = (c - (nc - 1) / 2.0) * geom.detector.col_spacing;
                const double w = td_weight(u, v, sdd, radius, local_pitch[i], feather);
                any_window = any_window || w > 0.0;
                const double cosw = sdd / std::sqrt(sdd * sdd + u * u + v * v);
                row[c] = w * cosw * g.at(i, r, c);
            }
            filter.apply(row.data());
            for (int c = 0; c < nc; ++c) q.at(i, r, c) = row[c];
        }
    }
    if (!any_window)
        throw std::runtime_error("fbp_reconstruct: Tam-Danielsson window is empty");

    Volume out(spec);
    Volume coverage(spec);  // per-voxel window-weighted angular coverage
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (int z = 0; z < spec.num_slices; ++z) {
        const double pz = spec.slice_z(z);
        for (int i = 0; i < na; ++i) {
            const double phi = geom.angles[i];
            const double sphi = std::sin(phi), cphi = std::cos(phi);
            const double sz = geom.z_offsets[i];
            const double dbeta = (i + 1 < na ? geom.angles[i + 1] - geom.angles[i]
                                             : geom.angles[i] - geom.angles[i - 1]);
            for (int y = 0; y < spec.height; ++y) {
                const double py = (y - (spec.height - 1) / 2.0) * spec.dy;
                for (int x = 0; x < spec.width; ++x) {
                    const double px = (x - (spec.width - 1) / 2.0) * spec.dx;
                    const double dist = radius - px * sphi - py * cphi;
                    if (dist < 1e-6 * radius) continue;
                    // actual-detector coordinates of the voxel's projection
                    const double u = sdd * (px * cphi - py * sphi) / dist;
                    const double v = sdd * (pz - sz) / dist;
                    const double cf = u / geom.detector.col_spacing + (nc - 1) / 2.0;
                    const double rf = v / geom.detector.row_spacing + (nr - 1) / 2.0;
                    const int c0 = int(std::floor(cf)), r0 = int(std::floor(rf));
                    if (c0 < 0 || c0 + 1 >= nc || r0 < 0 || r0 + 1 >= nr) continue;
                    const double wc = cf - c0, wr = rf - r0;
                    const double val =
                        (1 - wr) * ((1 - wc) * q.at(i, r0, c0) + wc * q.at(i, r0, c0 + 1)) +
                        wr * ((1 - wc) * q.at(i, r0 + 1, c0) + wc * q.at(i, r0 + 1, c0 + 1));
                    out.at(z, y, x) += dbeta * radius * radius / (dist * dist) * val;
                    coverage.at(z, y, x) +=
                        dbeta * td_weight(u, v, sdd, radius, local_pitch[i], feather);
                }
            }
        }
    }
    // The window grants each voxel an effective half-turn of nonredundant
    // data; normalize by the realized coverage (capped to avoid blowing up
    // barely-covered voxels at the scan ends).
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::size_t idx = 0; idx < out.data.size(); ++idx)
        out.data[idx] *= kPi / std::max(coverage.data[idx], kPi / 4.0);
    return out;
}

// ---- Huber ----------------------------------------------------------------

double huber_penalty(double t, double theta) {
    return t <= theta ? t * t / (2.0 * theta) : t - theta / 2.0;
}

namespace {

// forward-difference gradient components at voxel (z,y,x); zero at the far edges
void grad_at(const Volume& f, int z, int y, int x, double& gx, double& gy, double& gz) {
    const VolumeSpec& s = f.spec;
    gx = x + 1 < s.width ? (f.at(z, y, x + 1) - f.at(z, y, x)) / s.dx : 0.0;
    gy = y + 1 < s.height ? (f.at(z, y + 1, x) - f.at(z, y, x)) / s.dy : 0.0;
    gz = z + 1 < s.num_slices ? (f.at(z + 1, y, x) - f.at(z, y, x)) / s.dz : 0.0;
}

}  // namespace

double huber_objective(const Volume& f, const Sinogram& g, const HelicalGeometry& geom,
                       const HuberConfig& cfg) {
    const Sinogram af = forward_project(f, geom);
    double data = 0.0;
    for (std::size_t i = 0; i < af.size(); ++i) {
        const double d = af.data[i] - g.data[i];
        data += d * d;
    }
    double reg = 0.0;
    const VolumeSpec& s = f.spec;
#pragma omp parallel for schedule(static) num_threads(num_threads()) reduction(+ : reg)
    for (int z = 0; z < s.num_slices; ++z)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double gx, gy, gz;
                grad_at(f, z, y, x, gx, gy, gz);
                reg += huber_penalty(std::sqrt(gx * gx + gy * gy + gz * gz), cfg.theta);
            }
    return 0.5 * data + cfg.lambda * reg;
}

Volume huber_gradient(const Volume& f, const Sinogram& g, const HelicalGeometry& geom,
                      const HuberConfig& cfg) {
    Sinogram resid = forward_project(f, geom);
    for (std::size_t i = 0; i < resid.size(); ++i) resid.data[i] -= g.data[i];
    Volume grad = back_project(resid, geom, f.spec);

    const VolumeSpec& s = f.spec;
    // flow field psi(|grad f|)/|grad f| * grad f, psi = H'
    Volume fx(s), fy(s), fz(s);
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (int z = 0; z < s.num_slices; ++z)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double gx, gy, gz;
                grad_at(f, z, y, x, gx, gy, gz);
                const double t = std::sqrt(gx * gx + gy * gy + gz * gz);
                const double w = t <= cfg.theta ? 1.0 / cfg.theta : 1.0 / t;
                fx.at(z, y, x) = w * gx;
                fy.at(z, y, x) = w * gy;
                fz.at(z, y, x) = w * gz;
            }
    // exact adjoint of the forward-difference gradient (negative divergence)
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (int z = 0; z < s.num_slices; ++z)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double d = 0.0;
                if (x + 1 < s.width) d -= fx.at(z, y, x) / s.dx;
                if (x > 0) d += fx.at(z, y, x - 1) / s.dx;
                if (y + 1 < s.height) d -= fy.at(z, y, x) / s.dy;
                if (y > 0) d += fy.at(z, y - 1, x) / s.dy;
                if (z + 1 < s.num_slices) d -= fz.at(z, y, x) / s.dz;
                if (z > 0) d += fz.at(z - 1, y, x) / s.dz;
                grad.at(z, y, x) += cfg.lambda * d;
            }
    return grad;
}

Volume huber_reconstruct(const Sinogram& g, const HelicalGeometry& geom, const VolumeSpec& spec,
                         const HuberConfig& cfg, std::vector<double>* objective_trace) {
    geom.validate();
    spec.validate();
    if (cfg.theta <= 0) throw std::invalid_argument("huber_reconstruct: theta must be > 0");
    if (cfg.lambda < 0) throw std::invalid_argument("huber_reconstruct: lambda must be >= 0");

    const double op = estimate_op_norm(geom, spec, 20);
    const double hmin = std::min({spec.dx, spec.dy, spec.dz});
    const double lip = op * op + cfg.lambda * 12.0 / cfg.theta / (hmin * hmin);
    const double step = 1.0 / lip;

    Volume f(spec), f_prev(spec);
    double best = huber_objective(f, g, geom, cfg);
    if (objective_trace) objective_trace->push_back(best);
    int momentum_k = 1, bad = 0;

    for (int it = 0; it < cfg.iterations; ++it) {
        Volume y(spec);
        const double beta = double(momentum_k - 1) / (momentum_k + 2);
        for (std::size_t i = 0; i < y.data.size(); ++i)
            y.data[i] = f.data[i] + beta * (f.data[i] - f_prev.data[i]);
        const Volume grad = huber_gradient(y, g, geom, cfg);
        Volume f_next(spec);
        for (std::size_t i = 0; i < f_next.data.size(); ++i)
            f_next.data[i] = y.data[i] - step * grad.data[i];

        const double obj = huber_objective(f_next, g, geom, cfg);
        if (obj > best) {
            if (++bad >= 3)
                throw std::runtime_error("huber_reconstruct: objective increased for 3 "
                                         "consecutive iterations");
            // restart momentum and retake the step from the best iterate
            momentum_k = 1;
            const Volume grad_f = huber_gradient(f, g, geom, cfg);
            for (std::size_t i = 0; i < f_next.data.size(); ++i)
                f_next.data[i] = f.data[i] - step * grad_f.data[i];
            const double obj2 = huber_objective(f_next, g, geom, cfg);
            if (obj2 > best) {
                if (objective_trace) objective_trace->push_back(best);
                continue;  // keep f; counts toward the divergence guard
            }
            bad = 0;
            f_prev = f;
            f = std::move(f_next);
            best = obj2;
        } else {
            bad = 0;
            ++momentum_k;
            f_prev = std::move(f);
            f = std::move(f_next);
            best = obj;
        }
        if (objective_trace) objective_trace->push_back(best);
    }
    return f;
}

// ---- config files ---------------------------------------------------------

MethodConfig method_config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MethodConfig cfg;
    cfg.method = j.value("method", "ilpdh");
    if (j.contains("recon")) {
        const auto& r = j["recon"];
        cfg.recon.unrolled_iterations = r.value("unrolled_iterations", 1);
        const std::string init = r.value("init", "zeros");
        if (init == "zeros")
            cfg.recon.init_mode = ReconConfig::InitMode::kZeros;
        else if (init == "fbp")
            cfg.recon.init_mode = ReconConfig::InitMode::kFbp;
        else
            throw std::invalid_argument("config: init must be 'zeros' or 'fbp'");
        const std::string prec = r.value("precision", "double");
        if (prec == "double")
            cfg.recon.precision = ReconConfig::Precision::kDouble;
        else if (prec == "single")
            cfg.recon.precision = ReconConfig::Precision::kSingle;
        else
            throw std::invalid_argument("config: precision must be 'double' or 'single'");
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        cfg.train.iterations = t.value("iterations", 5000);
        cfg.train.batch_size = t.value("batch_size", 1);
        cfg.train.lr0 = t.value("lr0", 5e-4);
        cfg.train.window = t.value("window", 3);
        cfg.train.rng_seed = t.value("rng_seed", std::uint64_t(0));
    }
    if (j.contains("huber")) {
        const auto& h = j["huber"];
        cfg.huber.lambda = h.value("lambda", 0.15);
        cfg.huber.theta = h.value("theta", 0.0012);
        cfg.huber.iterations = h.value("iterations", 20);
    }
    if (j.contains("fbp")) cfg.fbp_bandwidth_fraction = j["fbp"].value("bandwidth_fraction", 0.45);
    cfg.recon.validate();
    cfg.train.validate();
    return cfg;
}

std::string method_config_to_json(const MethodConfig& cfg) {
    nlohmann::json j;
    j["method"] = cfg.method;
    j["recon"] = {
        {"unrolled_iterations", cfg.recon.unrolled_iterations},
        {"init", cfg.recon.init_mode == ReconConfig::InitMode::kFbp ? "fbp" : "zeros"},
        {"precision",
         cfg.recon.precision == ReconConfig::Precision::kSingle ? "single" : "double"}};
    j["train"] = {{"iterations", cfg.train.iterations},
                  {"batch_size", cfg.train.batch_size},
                  {"lr0", cfg.train.lr0},
                  {"window", cfg.train.window},
                  {"rng_seed", cfg.train.rng_seed}};
    j["huber"] = {{"lambda", cfg.huber.lambda},
                  {"theta", cfg.huber.theta},
                  {"iterations", cfg.huber.iterations}};
    j["fbp"] = {{"bandwidth_fraction", cfg.fbp_bandwidth_fraction}};
    return j.dump(2);
}

}  // namespace hct
