#include "hct/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace hct {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void HelicalGeometry::validate() const {
    if (angles.empty() || angles.size() != z_offsets.size())
        throw std::invalid_argument("HelicalGeometry: angles/z_offsets length mismatch or empty");
    for (std::size_t i = 1; i < angles.size(); ++i) {
        if (angles[i] <= angles[i - 1])
            throw std::invalid_argument("HelicalGeometry: angles must be strictly increasing");
        if (z_offsets[i] < z_offsets[i - 1])
            throw std::invalid_argument("HelicalGeometry: z_offsets must be nondecreasing");
    }
    if (source_radius <= 0)
        throw std::invalid_argument("HelicalGeometry: source_radius must be > 0");
    if (source_detector_distance <= source_radius)
        throw std::invalid_argument("HelicalGeometry: source_detector_distance must exceed source_radius");
    detector.validate();
}

HelicalGeometry build_geometry(double angular_increment,
                               const std::vector<double>& pitch_per_turn,
                               double num_turns_requested,
                               double source_radius,
                               double source_detector_distance,
                               const DetectorSpec& detector,
                               double z_start) {
    if (angular_increment <= 0)
        throw std::invalid_argument("build_geometry: angular_increment must be > 0");
    if (num_turns_requested <= 0)
        throw std::invalid_argument("build_geometry: num_turns_requested must be > 0");
    if (pitch_per_turn.empty())
        throw std::invalid_argument("build_geometry: pitch list empty");
    for (double p : pitch_per_turn)
        if (p <= 0) throw std::invalid_argument("build_geometry: pitch values must be > 0");
    if (source_radius <= 0 || source_detector_distance <= source_radius)
        throw std::invalid_argument("build_geometry: invalid distances");
    detector.validate();

    const int n = int(std::ceil(num_turns_requested * kTwoPi / angular_increment));
    HelicalGeometry g;
    g.angles.resize(n);
    g.z_offsets.resize(n);
    g.source_radius = source_radius;
    g.source_detector_distance = source_detector_distance;
    g.detector = detector;

    double z = z_start;
    for (int i = 0; i < n; ++i) {
        const double angle = i * angular_increment;
        g.angles[i] = angle;
        g.z_offsets[i] = z;
        // pitch of the turn the segment [angle, angle+inc) starts in
        const int turn = int(std::floor(angle / kTwoPi));
        const double pitch =
            pitch_per_turn[std::min<std::size_t>(turn, pitch_per_turn.size() - 1)];
        z += pitch * angular_increment / kTwoPi;
    }
    g.validate();
    return g;
}

Vec3 source_position(const HelicalGeometry& geom, int i) {
    if (i < 0 || i >= geom.num_angles())
        throw std::out_of_range("source_position: angle index out of range");
    const double phi = geom.angles[i];
    const double r = geom.source_radius;
    return {r * std::sin(phi), r * std::cos(phi), geom.z_offsets[i]};
}

Vec3 detector_cell_position(const HelicalGeometry& geom, int i, int col, int row) {
    if (i < 0 || i >= geom.num_angles())
        throw std::out_of_range("detector_cell_position: angle index out of range");
    const DetectorSpec& d = geom.detector;
    if (col < 0 || col >= d.num_cols || row < 0 || row >= d.num_rows)
        throw std::out_of_range("detector_cell_position: cell index out of range");
    const double phi = geom.angles[i];
    const double sp = std::sin(phi), cp = std::cos(phi);
    const Vec3 src = source_position(geom, i);
    // unit direction source -> isocenter axis, in-plane tangent, rows along +z
    const Vec3 dir{-sp, -cp, 0.0};
    const Vec3 tan{cp, -sp, 0.0};
    const double u = (col - (d.num_cols - 1) / 2.0) * d.col_spacing;
    const double v = (row - (d.num_rows - 1) / 2.0) * d.row_spacing;
    return {src.x + geom.source_detector_distance * dir.x + u * tan.x,
            src.y + geom.source_detector_distance * dir.y + u * tan.y,
            src.z + v};
}

IndexRange ray_slice_extent(const Vec3& src, const Vec3& det, const VolumeSpec& vol) {
    // Clip segment src->det against the volume box, centered in x/y at the
    // isocenter, z spanning [z_origin - dz/2, z_origin + (N_z - 1/2) dz].
    const double hx = vol.width * vol.dx / 2.0;
    const double hy = vol.height * vol.dy / 2.0;
    const double z_lo = vol.z_origin - vol.dz / 2.0;
    const double z_hi = vol.z_origin + (vol.num_slices - 0.5) * vol.dz;

    double t0 = 0.0, t1 = 1.0;
    auto clip = [&](double p, double d, double lo, double hi) {
        if (std::abs(d) < 1e-300) {
            if (p < lo || p > hi) t0 = 1.0, t1 = 0.0;
            return;
        }
        double ta = (lo - p) / d, tb = (hi - p) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    };
    const Vec3 d = det - src;
    clip(src.x, d.x, -hx, hx);
    clip(src.y, d.y, -hy, hy);
    clip(src.z, d.z, z_lo, z_hi);
    if (t0 >= t1) return {0, 0};

    const double za = src.z + t0 * d.z, zb = src.z + t1 * d.z;
    const double fz_min = (std::min(za, zb) - vol.z_origin) / vol.dz;
    const double fz_max = (std::max(za, zb) - vol.z_origin) / vol.dz;
    // trilinear interpolation touches floor(fz) and floor(fz)+1
    int lo = int(std::floor(fz_min));
    int hi = int(std::floor(fz_max)) + 2;
    lo = std::max(lo, 0);
    hi = std::min(hi, vol.num_slices);
    if (lo >= hi) return {0, 0};
    return {lo, hi};
}

namespace {

struct TurnScan {
    std::vector<IndexRange> turns;
    IndexRange tail{0, 0};
    std::vector<int> centers;  // nearest slice to mean source z, per turn
};

TurnScan scan_turns(const HelicalGeometry& geom, const VolumeSpec& vol) {
    geom.validate();
    vol.validate();
    TurnScan s;
    const int n = geom.num_angles();
    int a = 0;
    while (true) {
        int b = -1;
        for (int i = a; i < n; ++i) {
            if (geom.angles[i] - geom.angles[a] >= kTwoPi) {
                b = i;
                break;
            }
        }
        if (b < 0) break;  // incomplete turn
        s.turns.push_back({a, b});
        a = b;
    }
    if (s.turns.empty())
        throw std::invalid_argument("partition_turns: geometry has no complete turn");
    s.tail = {a, n};

    for (const auto& [ta, tb] : s.turns) {
        double zm = 0.0;
        for (int i = ta; i < tb; ++i) zm += geom.z_offsets[i];
        zm /= (tb - ta);
        int c = int(std::lround((zm - vol.z_origin) / vol.dz));
        c = std::clamp(c, 0, vol.num_slices - 1);
        s.centers.push_back(c);
    }
    return s;
}

// Largest slice distance from the turn's center slab anchor over all rays of
// the turn. Checking the first/last detector row at every column suffices:
// for a fixed column, the in-volume z extent is monotone in the row.
int max_center_distance(const HelicalGeometry& geom, const VolumeSpec& vol,
                        const IndexRange& turn, int center) {
    int dist = 0;
    const int rows[2] = {0, geom.detector.num_rows - 1};
    for (int i = turn.first; i < turn.second; ++i) {
        const Vec3 src = source_position(geom, i);
        for (int c = 0; c < geom.detector.num_cols; ++c) {
            for (int r : rows) {
                const Vec3 det = detector_cell_position(geom, i, c, r);
                const auto [lo, hi] = ray_slice_extent(src, det, vol);
                if (lo >= hi) continue;
                dist = std::max(dist, std::abs(lo - center));
                dist = std::max(dist, std::abs(hi - 1 - center));
            }
        }
    }
    return dist;
}

}  // namespace

TurnPartition partition_turns(const HelicalGeometry& geom, const VolumeSpec& vol,
                              int num_thickness) {
    if (num_thickness < 1 || num_thickness % 2 == 0)
        throw std::invalid_argument("partition_turns: subvolume thickness must be odd and >= 1");
    TurnScan s = scan_turns(geom, vol);

    TurnPartition p;
    p.turn_ranges = s.turns;
    p.tail_discard = s.tail;
    p.subvolume_centers = s.centers;
    p.subvolume_thickness = num_thickness;
    const int half = (num_thickness - 1) / 2;
    for (std::size_t j = 0; j < s.turns.size(); ++j) {
        const int c = s.centers[j];
        const int lo = std::max(c - half, 0);
        const int hi = std::min(c + half + 1, vol.num_slices);
        p.subvolume_ranges.push_back({lo, hi});
        // Both ray extents and slab are clamped to the volume, so containment
        // reduces to: the largest clamped distance from the center fits in
        // the half-thickness.
        const int need = max_center_distance(geom, vol, s.turns[j], c);
        if (need > half) {
            std::ostringstream msg;
            msg << "partition_turns: turn " << j << " rays reach " << need
                << " slices from the slab center; thickness " << num_thickness
                << " is too small (need >= " << 2 * need + 1 << ")";
            throw std::invalid_argument(msg.str());
        }
    }
    return p;
}

int min_subvolume_thickness(const HelicalGeometry& geom, const VolumeSpec& vol) {
    TurnScan s = scan_turns(geom, vol);
    int need = 0;
    for (std::size_t j = 0; j < s.turns.size(); ++j)
        need = std::max(need, max_center_distance(geom, vol, s.turns[j], s.centers[j]));
    return 2 * need + 1;
}

std::string geometry_to_json(const HelicalGeometry& geom) {
    nlohmann::json j;
    j["angles"] = geom.angles;
    j["z_offsets"] = geom.z_offsets;
    j["source_radius"] = geom.source_radius;
    j["source_detector_distance"] = geom.source_detector_distance;
    j["detector"] = {{"num_cols", geom.detector.num_cols},
                     {"num_rows", geom.detector.num_rows},
                     {"col_spacing", geom.detector.col_spacing},
                     {"row_spacing", geom.detector.row_spacing}};
    return j.dump(2);
}

HelicalGeometry geometry_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    HelicalGeometry g;
    g.angles = j.at("angles").get<std::vector<double>>();
    g.z_offsets = j.at("z_offsets").get<std::vector<double>>();
    g.source_radius = j.at("source_radius").get<double>();
    g.source_detector_distance = j.at("source_detector_distance").get<double>();
    const auto& d = j.at("detector");
    g.detector.num_cols = d.at("num_cols").get<int>();
    g.detector.num_rows = d.at("num_rows").get<int>();
    g.detector.col_spacing = d.at("col_spacing").get<double>();
    g.detector.row_spacing = d.at("row_spacing").get<double>();
    g.validate();
    return g;
}

std::string geometry_digest(const HelicalGeometry& geom) {
    // FNV-1a over the canonical JSON text
    const std::string s = geometry_to_json(geom);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace hct
