#include "hct/projector.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "hct/parallel.hpp"

namespace hct {

namespace {
int g_threads = 0;
bool g_adjoint_fault = false;
}

int num_threads() {
    if (g_threads > 0) return g_threads;
    if (const char* env = std::getenv("HELICAL_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const int hw = int(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

void set_num_threads(int n) { g_threads = n > 0 ? n : 0; }

void set_adjoint_fault_injection(bool enabled) { g_adjoint_fault = enabled; }

namespace {

// Joseph-style ray walk: steps through voxel-center planes along the dominant
// in-plane axis and emits the four trilinear corner weights per sample,
// scaled by the physical step length. emit(iz, iy, ix, weight) is called in a
// fixed order, which every caller (forward, adjoint, slice-restricted
// adjoint, dense oracle) shares so that their arithmetic agrees.
template <class Fn>
inline void walk_ray(const Vec3& src, const Vec3& det, const VolumeSpec& v, Fn&& emit) {
    const Vec3 dir = det - src;
    const double norm = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
    const bool dom_x = std::abs(dir.x) >= std::abs(dir.y);

    const int n = dom_x ? v.width : v.height;
    const int m = dom_x ? v.height : v.width;  // in-plane interpolated axis
    const double step = dom_x ? v.dx : v.dy;
    const double m_sp = dom_x ? v.dy : v.dx;
    const double src_d = dom_x ? src.x : src.y;
    const double dir_d = dom_x ? dir.x : dir.y;
    const double src_m = dom_x ? src.y : src.x;
    const double dir_m = dom_x ? dir.y : dir.x;
    if (dir_d == 0.0) return;
    const double ws = step * norm / std::abs(dir_d);
    const double c0 = -(n - 1) / 2.0 * step;

    for (int i = 0; i < n; ++i) {
        const double t = (c0 + i * step - src_d) / dir_d;
        if (t < 0.0 || t > 1.0) continue;
        const double pm = src_m + t * dir_m;
        const double pz = src.z + t * dir.z;
        const double fm = pm / m_sp + (m - 1) / 2.0;
        const double fz = (pz - v.z_origin) / v.dz;
        const int im0 = int(std::floor(fm));
        const int iz0 = int(std::floor(fz));
        const double wm = fm - im0;
        const double wz = fz - iz0;

        for (int dz = 0; dz < 2; ++dz) {
            const int iz = iz0 + dz;
            if (iz < 0 || iz >= v.num_slices) continue;
            const double wzc = dz ? wz : 1.0 - wz;
            for (int dm = 0; dm < 2; ++dm) {
                const int im = im0 + dm;
                if (im < 0 || im >= m) continue;
                const double w = ws * wzc * (dm ? wm : 1.0 - wm);
                if (dom_x)
                    emit(iz, im, i, w);
                else
                    emit(iz, i, im, w);
            }
        }
    }
}

// Plane-index interval along the ray whose samples can touch slice k
// (conservative; exact membership is re-checked per sample).
inline void slice_plane_interval(const Vec3& src, const Vec3& det, const VolumeSpec& v,
                                 int k, int& i_lo, int& i_hi) {
    const Vec3 dir = det - src;
    const bool dom_x = std::abs(dir.x) >= std::abs(dir.y);
    const int n = dom_x ? v.width : v.height;
    const double step = dom_x ? v.dx : v.dy;
    const double src_d = dom_x ? src.x : src.y;
    const double dir_d = dom_x ? dir.x : dir.y;
    if (dir_d == 0.0) {
        i_lo = 0;
        i_hi = 0;
        return;
    }
    const double c0 = -(n - 1) / 2.0 * step;
    auto fz_at = [&](double i) {
        const double t = (c0 + i * step - src_d) / dir_d;
        return (src.z + t * dir.z - v.z_origin) / v.dz;
    };
    const double f0 = fz_at(0), f1 = fz_at(n - 1);
    const double slope = n > 1 ? (f1 - f0) / (n - 1) : 0.0;
    if (std::abs(slope) < 1e-12) {
        const bool hit = f0 > k - 1.5 && f0 < k + 1.5;
        i_lo = 0;
        i_hi = hit ? n : 0;
        return;
    }
    double ia = (k - 1.5 - f0) / slope;
    double ib = (k + 1.5 - f0) / slope;
    if (ia > ib) std::swap(ia, ib);
    i_lo = std::max(0, int(std::floor(ia)) - 1);
    i_hi = std::min(n, int(std::ceil(ib)) + 2);
}

// Sample positions identical to walk_ray but restricted to planes
// [i_lo, i_hi) and emitting only corners in slice k.
template <class Fn>
inline void walk_ray_slice(const Vec3& src, const Vec3& det, const VolumeSpec& v, int k,
                           int i_lo, int i_hi, Fn&& emit) {
    const Vec3 dir = det - src;
    const double norm = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
    const bool dom_x = std::abs(dir.x) >= std::abs(dir.y);

    const int n = dom_x ? v.width : v.height;
    const int m = dom_x ? v.height : v.width;
    const double step = dom_x ? v.dx : v.dy;
    const double m_sp = dom_x ? v.dy : v.dx;
    const double src_d = dom_x ? src.x : src.y;
    const double dir_d = dom_x ? dir.x : dir.y;
    const double src_m = dom_x ? src.y : src.x;
    const double dir_m = dom_x ? dir.y : dir.x;
    if (dir_d == 0.0) return;
    const double ws = step * norm / std::abs(dir_d);
    const double c0 = -(n - 1) / 2.0 * step;

    for (int i = i_lo; i < i_hi && i < n; ++i) {
        const double t = (c0 + i * step - src_d) / dir_d;
        if (t < 0.0 || t > 1.0) continue;
        const double pm = src_m + t * dir_m;
        const double pz = src.z + t * dir.z;
        const double fm = pm / m_sp + (m - 1) / 2.0;
        const double fz = (pz - v.z_origin) / v.dz;
        const int im0 = int(std::floor(fm));
        const int iz0 = int(std::floor(fz));
        const double wm = fm - im0;
        const double wz = fz - iz0;

        for (int dz = 0; dz < 2; ++dz) {
            const int iz = iz0 + dz;
            if (iz != k) continue;
            const double wzc = dz ? wz : 1.0 - wz;
            for (int dm = 0; dm < 2; ++dm) {
                const int im = im0 + dm;
                if (im < 0 || im >= m) continue;
                const double w = ws * wzc * (dm ? wm : 1.0 - wm);
                if (dom_x)
                    emit(im, i, w);
                else
                    emit(i, im, w);
            }
        }
    }
}

}  // namespace

Sinogram forward_project_range(const Volume& f, const HelicalGeometry& geom,
                               int angle_begin, int angle_end) {
    const DetectorSpec& d = geom.detector;
    const int na = angle_end - angle_begin;
    Sinogram out(na, d.num_rows, d.num_cols);
    out.geom_id = geometry_digest(geom);
    const std::size_t rays = std::size_t(na) * d.num_rows * d.num_cols;

#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (std::ptrdiff_t ray = 0; ray < std::ptrdiff_t(rays); ++ray) {
        const int a = int(ray / (d.num_rows * d.num_cols));
        const int rest = int(ray % (d.num_rows * d.num_cols));
        const int r = rest / d.num_cols;
        const int c = rest % d.num_cols;
        const Vec3 src = source_position(geom, angle_begin + a);
        const Vec3 det = detector_cell_position(geom, angle_begin + a, c, r);
        double sum = 0.0;
        walk_ray(src, det, f.spec, [&](int iz, int iy, int ix, double w) {
            sum += w * f.at(iz, iy, ix);
        });
        out.data[ray] = sum;
    }
    return out;
}

Volume back_project_range(const Sinogram& u, const HelicalGeometry& geom,
                          int angle_begin, int angle_end, const VolumeSpec& spec) {
    const DetectorSpec& d = geom.detector;
    if (u.num_angles != angle_end - angle_begin || u.num_rows != d.num_rows ||
        u.num_cols != d.num_cols)
        throw std::invalid_argument("back_project: sinogram shape mismatch");
    Volume out(spec);
    const double fault = g_adjoint_fault ? 1.0 + 1e-6 : 1.0;

    // Gather per output slice: each slice is filled by exactly one thread with
    // rays visited in a fixed (angle, row, col) order, so the result is
    // bitwise independent of the thread count.
#pragma omp parallel for schedule(static) num_threads(num_threads())
    for (int k = 0; k < spec.num_slices; ++k) {
        double* slice = out.data.data() + std::size_t(k) * spec.height * spec.width;
        for (int a = angle_begin; a < angle_end; ++a) {
            const Vec3 src = source_position(geom, a);
            for (int r = 0; r < d.num_rows; ++r) {
                for (int c = 0; c < d.num_cols; ++c) {
                    const double val = u.at(a - angle_begin, r, c);
                    const Vec3 det = detector_cell_position(geom, a, c, r);
                    int i_lo, i_hi;
                    slice_plane_interval(src, det, spec, k, i_lo, i_hi);
                    if (i_lo >= i_hi) continue;
                    walk_ray_slice(src, det, spec, k, i_lo, i_hi,
                                   [&](int iy, int ix, double w) {
                                       slice[std::size_t(iy) * spec.width + ix] +=
                                           fault * w * val;
                                   });
                }
            }
        }
    }
    return out;
}

Sinogram forward_project(const Volume& f, const HelicalGeometry& geom) {
    return forward_project_range(f, geom, 0, geom.num_angles());
}

Volume back_project(const Sinogram& u, const HelicalGeometry& geom, const VolumeSpec& spec) {
    return back_project_range(u, geom, 0, geom.num_angles(), spec);
}

Sinogram forward_project_ref(const Volume& f, const HelicalGeometry& geom) {
    const DetectorSpec& d = geom.detector;
    Sinogram out(geom.num_angles(), d.num_rows, d.num_cols);
    out.geom_id = geometry_digest(geom);
    std::size_t ray = 0;
    for (int a = 0; a < geom.num_angles(); ++a) {
        const Vec3 src = source_position(geom, a);
        for (int r = 0; r < d.num_rows; ++r) {
            for (int c = 0; c < d.num_cols; ++c) {
                const Vec3 det = detector_cell_position(geom, a, c, r);
                double sum = 0.0;
                walk_ray(src, det, f.spec, [&](int iz, int iy, int ix, double w) {
                    sum += w * f.at(iz, iy, ix);
                });
                out.data[ray++] = sum;
            }
        }
    }
    return out;
}

Volume back_project_ref(const Sinogram& u, const HelicalGeometry& geom, const VolumeSpec& spec) {
    const DetectorSpec& d = geom.detector;
    if (u.num_angles != geom.num_angles() || u.num_rows != d.num_rows ||
        u.num_cols != d.num_cols)
        throw std::invalid_argument("back_project_ref: sinogram shape mismatch");
    Volume out(spec);
    const double fault = g_adjoint_fault ? 1.0 + 1e-6 : 1.0;
    for (int a = 0; a < geom.num_angles(); ++a) {
        const Vec3 src = source_position(geom, a);
        for (int r = 0; r < d.num_rows; ++r) {
            for (int c = 0; c < d.num_cols; ++c) {
                const double val = u.at(a, r, c);
                const Vec3 det = detector_cell_position(geom, a, c, r);
                walk_ray(src, det, spec, [&](int iz, int iy, int ix, double w) {
                    out.at(iz, iy, ix) += fault * w * val;
                });
            }
        }
    }
    return out;
}

VolumeSpec subvolume_spec(const VolumeSpec& full, const TurnPartition& partition, int j) {
    const auto [lo, hi] = partition.subvolume_ranges.at(j);
    VolumeSpec s = full;
    s.num_slices = hi - lo;
    s.z_origin = full.z_origin + lo * full.dz;
    return s;
}

Sinogram forward_project_turn(const Volume& f_sub, const TurnRestriction& restriction,
                              const HelicalGeometry& geom) {
    restriction.validate();
    const int j = restriction.turn_index;
    const auto& p = restriction.partition;
    if (f_sub.spec.num_slices != p.subvolume_num_slices(j))
        throw std::invalid_argument("forward_project_turn: sub-volume shape mismatch");
    const auto [a, b] = p.turn_ranges[j];
    return forward_project_range(f_sub, geom, a, b);
}

Volume back_project_turn(const Sinogram& u_chunk, const TurnRestriction& restriction,
                         const HelicalGeometry& geom, const VolumeSpec& full_spec) {
    restriction.validate();
    const int j = restriction.turn_index;
    const auto& p = restriction.partition;
    const auto [a, b] = p.turn_ranges[j];
    if (u_chunk.num_angles != b - a)
        throw std::invalid_argument("back_project_turn: chunk shape mismatch");
    return back_project_range(u_chunk, geom, a, b, subvolume_spec(full_spec, p, j));
}

Volume project_image(const Volume& f, const TurnPartition& partition, int j) {
    const auto [lo, hi] = partition.subvolume_ranges.at(j);
    if (hi > f.spec.num_slices)
        throw std::invalid_argument("project_image: slice range exceeds volume");
    Volume out(subvolume_spec(f.spec, partition, j));
    const std::size_t slice = std::size_t(f.spec.height) * f.spec.width;
    std::copy(f.data.begin() + lo * slice, f.data.begin() + hi * slice, out.data.begin());
    return out;
}

Volume pad_image(const Volume& f_sub, const TurnPartition& partition, int j,
                 const VolumeSpec& full_spec) {
    const auto [lo, hi] = partition.subvolume_ranges.at(j);
    if (f_sub.spec.num_slices != hi - lo || hi > full_spec.num_slices)
        throw std::invalid_argument("pad_image: slice range mismatch");
    Volume out(full_spec);
    const std::size_t slice = std::size_t(full_spec.height) * full_spec.width;
    std::copy(f_sub.data.begin(), f_sub.data.end(), out.data.begin() + lo * slice);
    return out;
}

Sinogram project_data(const Sinogram& g, const TurnPartition& partition, int j) {
    const auto [a, b] = partition.turn_ranges.at(j);
    if (b > g.num_angles)
        throw std::invalid_argument("project_data: angle range exceeds sinogram");
    Sinogram out(b - a, g.num_rows, g.num_cols);
    out.geom_id = g.geom_id;
    const std::size_t proj = std::size_t(g.num_rows) * g.num_cols;
    std::copy(g.data.begin() + a * proj, g.data.begin() + b * proj, out.data.begin());
    return out;
}

Sinogram pad_data(const Sinogram& chunk, const TurnPartition& partition, int j,
                  int full_num_angles) {
    const auto [a, b] = partition.turn_ranges.at(j);
    if (chunk.num_angles != b - a || b > full_num_angles)
        throw std::invalid_argument("pad_data: angle range mismatch");
    Sinogram out(full_num_angles, chunk.num_rows, chunk.num_cols);
    out.geom_id = chunk.geom_id;
    const std::size_t proj = std::size_t(chunk.num_rows) * chunk.num_cols;
    std::copy(chunk.data.begin(), chunk.data.end(), out.data.begin() + a * proj);
    return out;
}

}  // namespace hct
