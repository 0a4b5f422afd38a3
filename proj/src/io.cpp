#include "hct/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

namespace hct {

namespace {

void write_header(std::ofstream& f, const char* magic, const std::uint32_t* dims, int ndims) {
    char hdr[16] = {};
    std::memcpy(hdr, magic, 8);
    f.write(hdr, 16);
    f.write(reinterpret_cast<const char*>(dims), ndims * sizeof(std::uint32_t));
}

void read_header(std::ifstream& f, const char* magic, std::uint32_t* dims, int ndims,
                 const std::string& path) {
    char hdr[16] = {};
    f.read(hdr, 16);
    if (!f || std::memcmp(hdr, magic, 8) != 0)
        throw std::runtime_error("bad magic in " + path);
    f.read(reinterpret_cast<char*>(dims), ndims * sizeof(std::uint32_t));
    if (!f) throw std::runtime_error("truncated header in " + path);
}

void write_f32(std::ofstream& f, const std::vector<double>& data) {
    std::vector<float> buf(data.begin(), data.end());
    f.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
}

void read_f32(std::ifstream& f, std::vector<double>& data, std::size_t n,
              const std::string& path) {
    std::vector<float> buf(n);
    f.read(reinterpret_cast<char*>(buf.data()), n * sizeof(float));
    if (!f) throw std::runtime_error("truncated payload in " + path);
    data.assign(buf.begin(), buf.end());
}

}  // namespace

void write_volume(const std::string& path, const Volume& vol) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    const std::uint32_t dims[3] = {std::uint32_t(vol.spec.num_slices),
                                   std::uint32_t(vol.spec.height),
                                   std::uint32_t(vol.spec.width)};
    write_header(f, "HCTVOL01", dims, 3);
    write_f32(f, vol.data);
    if (!f) throw std::runtime_error("write failed: " + path);

    nlohmann::json j = {{"dx", vol.spec.dx},
                        {"dy", vol.spec.dy},
                        {"dz", vol.spec.dz},
                        {"z_origin", vol.spec.z_origin}};
    std::ofstream sf(path + ".json");
    sf << j.dump(2) << "\n";
}

Volume read_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::uint32_t dims[3];
    read_header(f, "HCTVOL01", dims, 3, path);
    VolumeSpec spec;
    spec.num_slices = int(dims[0]);
    spec.height = int(dims[1]);
    spec.width = int(dims[2]);

    std::ifstream sf(path + ".json");
    if (sf) {
        nlohmann::json j = nlohmann::json::parse(sf);
        spec.dx = j.value("dx", 1.0);
        spec.dy = j.value("dy", 1.0);
        spec.dz = j.value("dz", 1.0);
        spec.z_origin = j.value("z_origin", 0.0);
    }
    spec.validate();
    Volume vol(spec);
    read_f32(f, vol.data, spec.num_voxels(), path);
    return vol;
}

void write_sinogram(const std::string& path, const Sinogram& sino) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    const std::uint32_t dims[3] = {std::uint32_t(sino.num_angles),
                                   std::uint32_t(sino.num_rows),
                                   std::uint32_t(sino.num_cols)};
    write_header(f, "HCTSIN01", dims, 3);
    write_f32(f, sino.data);
    if (!f) throw std::runtime_error("write failed: " + path);

    nlohmann::json j = {{"geometry_id", sino.geom_id}};
    std::ofstream sf(path + ".json");
    sf << j.dump(2) << "\n";
}

Sinogram read_sinogram(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::uint32_t dims[3];
    read_header(f, "HCTSIN01", dims, 3, path);
    Sinogram sino{int(dims[0]), int(dims[1]), int(dims[2])};
    read_f32(f, sino.data, sino.size(), path);

    std::ifstream sf(path + ".json");
    if (sf) {
        nlohmann::json j = nlohmann::json::parse(sf);
        sino.geom_id = j.value("geometry_id", "");
    }
    return sino;
}

std::string file_digest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (f) {
        f.read(buf, sizeof(buf));
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace hct
