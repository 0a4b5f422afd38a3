#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hct {

// Image-space raster spec. In-plane dims are fixed across a dataset,
// the slice count may vary per scan.
struct VolumeSpec {
    int width = 0;       // voxels along x
    int height = 0;      // voxels along y
    int num_slices = 0;  // voxels along z
    double dx = 1.0, dy = 1.0, dz = 1.0;  // voxel size [mm]
    double z_origin = 0.0;  // world z of the center of slice 0 [mm]

    std::size_t num_voxels() const {
        return std::size_t(width) * height * num_slices;
    }
    void validate() const {
        if (width < 1 || height < 1 || num_slices < 1)
            throw std::invalid_argument("VolumeSpec: dims must be >= 1");
        if (dx <= 0 || dy <= 0 || dz <= 0)
            throw std::invalid_argument("VolumeSpec: voxel sizes must be > 0");
    }
    // world z of the center of slice k
    double slice_z(int k) const { return z_origin + k * dz; }
    bool same_grid(const VolumeSpec& o) const {
        return width == o.width && height == o.height && num_slices == o.num_slices &&
               dx == o.dx && dy == o.dy && dz == o.dz && z_origin == o.z_origin;
    }
};

// Dense 3D raster, layout (slice, row, col): index = (z * height + y) * width + x.
struct Volume {
    VolumeSpec spec;
    std::vector<double> data;

    Volume() = default;
    explicit Volume(const VolumeSpec& s) : spec(s), data(s.num_voxels(), 0.0) { s.validate(); }

    double& at(int z, int y, int x) {
        return data[(std::size_t(z) * spec.height + y) * spec.width + x];
    }
    double at(int z, int y, int x) const {
        return data[(std::size_t(z) * spec.height + y) * spec.width + x];
    }
    std::size_t size() const { return data.size(); }
};

struct DetectorSpec {
    int num_cols = 0;          // D_w
    int num_rows = 0;          // D_h
    double col_spacing = 1.0;  // [mm]
    double row_spacing = 1.0;  // [mm]

    void validate() const {
        if (num_cols < 1 || num_rows < 1)
            throw std::invalid_argument("DetectorSpec: counts must be >= 1");
        if (col_spacing <= 0 || row_spacing <= 0)
            throw std::invalid_argument("DetectorSpec: spacings must be > 0");
    }
};

// Dense data raster, layout (angle, row, col):
// index = (angle * num_rows + row) * num_cols + col.
struct Sinogram {
    std::string geom_id;  // identifier of the generating geometry
    int num_angles = 0;
    int num_rows = 0;
    int num_cols = 0;
    std::vector<double> data;

    Sinogram() = default;
    Sinogram(int angles, int rows, int cols)
        : num_angles(angles), num_rows(rows), num_cols(cols),
          data(std::size_t(angles) * rows * cols, 0.0) {}

    double& at(int a, int r, int c) {
        return data[(std::size_t(a) * num_rows + r) * num_cols + c];
    }
    double at(int a, int r, int c) const {
        return data[(std::size_t(a) * num_rows + r) * num_cols + c];
    }
    std::size_t size() const { return data.size(); }
};

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }

}  // namespace hct
