#include "hct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hct/parallel.hpp"

namespace hct {

namespace {

constexpr int kSsimRadius = 5;  // 11x11 window
constexpr double kSsimSigma = 1.5;
constexpr double kK1 = 0.01, kK2 = 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(2 * kSsimRadius + 1);
    double sum = 0.0;
    for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
        k[i + kSsimRadius] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
        sum += k[i + kSsimRadius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable Gaussian blur with nearest-edge padding
void blur(const std::vector<double>& in, std::vector<double>& out, int h, int w,
          const std::vector<double>& k) {
    std::vector<double> tmp(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                s += k[i + kSsimRadius] * in[std::size_t(y) * w + xx];
            }
            tmp[std::size_t(y) * w + x] = s;
        }
    out.resize(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -kSsimRadius; i <= kSsimRadius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                s += k[i + kSsimRadius] * tmp[std::size_t(yy) * w + x];
            }
            out[std::size_t(y) * w + x] = s;
        }
}

}  // namespace

double ssim_2d(const double* a, const double* b, int height, int width, double range) {
    if (height < 2 * kSsimRadius + 1 || width < 2 * kSsimRadius + 1)
        throw std::invalid_argument("ssim_2d: slice smaller than the 11x11 window");
    const std::size_t n = std::size_t(height) * width;
    std::vector<double> va(a, a + n), vb(b, b + n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = va[i] * va[i];
        bb[i] = vb[i] * vb[i];
        ab[i] = va[i] * vb[i];
    }
    const std::vector<double> k = gaussian_kernel();
    std::vector<double> ua, ub, uaa, ubb, uab;
    blur(va, ua, height, width, k);
    blur(vb, ub, height, width, k);
    blur(aa, uaa, height, width, k);
    blur(bb, ubb, height, width, k);
    blur(ab, uab, height, width, k);

    const double c1 = (kK1 * range) * (kK1 * range);
    const double c2 = (kK2 * range) * (kK2 * range);
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = kSsimRadius; y < height - kSsimRadius; ++y)
        for (int x = kSsimRadius; x < width - kSsimRadius; ++x) {
            const std::size_t i = std::size_t(y) * width + x;
            const double vx = uaa[i] - ua[i] * ua[i];
            const double vy = ubb[i] - ub[i] * ub[i];
            const double vxy = uab[i] - ua[i] * ub[i];
            const double s = ((2 * ua[i] * ub[i] + c1) * (2 * vxy + c2)) /
                             ((ua[i] * ua[i] + ub[i] * ub[i] + c1) * (vx + vy + c2));
            sum += s;
            ++count;
        }
    return sum / double(count);
}

EvalReport evaluate(const Volume& recon, const Volume& truth, int discard) {
    if (!recon.spec.same_grid(truth.spec))
        throw std::invalid_argument("evaluate: volume shapes differ");
    const int nz = recon.spec.num_slices;
    if (nz <= 2 * discard)
        throw std::invalid_argument("evaluate: too few slices for the discard protocol");

    EvalReport rep;
    rep.retained_begin = discard;
    rep.retained_end = nz - discard;

    const std::size_t plane = std::size_t(recon.spec.height) * recon.spec.width;
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (int z = rep.retained_begin; z < rep.retained_end; ++z)
        for (std::size_t i = 0; i < plane; ++i) {
            const double v = truth.data[z * plane + i];
            tmin = std::min(tmin, v);
            tmax = std::max(tmax, v);
        }
    const double range = tmax - tmin;

    double mse = 0.0;
    for (int z = rep.retained_begin; z < rep.retained_end; ++z) {
        double s = 0.0;
        const double* r = recon.data.data() + z * plane;
        const double* t = truth.data.data() + z * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const double d = r[i] - t[i];
            s += d * d;
        }
        rep.slice_rmse.push_back(std::sqrt(s / double(plane)));
        mse += s;
    }
    mse /= double(plane) * (rep.retained_end - rep.retained_begin);
    rep.psnr = mse == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(range * range / mse);

    double ssim_sum = 0.0;
    for (int z = rep.retained_begin; z < rep.retained_end; ++z)
        ssim_sum += ssim_2d(recon.data.data() + z * plane, truth.data.data() + z * plane,
                            recon.spec.height, recon.spec.width, range);
    rep.ssim = ssim_sum / (rep.retained_end - rep.retained_begin);
    return rep;
}

double slice_rmse_stability(const EvalReport& report, const TurnPartition& partition,
                            int train_turns) {
    const int ns = partition.num_turns();
    if (ns < train_turns + 1)
        throw std::invalid_argument("slice_rmse_stability: needs more turns than train_turns");
    double early = 0.0, late = 0.0;
    int early_n = 0, late_n = 0;
    for (std::size_t i = 0; i < report.slice_rmse.size(); ++i) {
        const int z = report.retained_begin + int(i);
        int best = 0;
        for (int j = 1; j < ns; ++j)
            if (std::abs(z - partition.subvolume_centers[j]) <
                std::abs(z - partition.subvolume_centers[best]))
                best = j;
        if (best < train_turns) {
            early += report.slice_rmse[i];
            ++early_n;
        } else {
            late += report.slice_rmse[i];
            ++late_n;
        }
    }
    if (early_n == 0 || late_n == 0)
        throw std::invalid_argument("slice_rmse_stability: retained slices do not span both "
                                    "turn groups");
    return (late / late_n) / (early / early_n);
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["psnr"] = std::isinf(report.psnr) ? nlohmann::json("inf") : nlohmann::json(report.psnr);
    j["ssim"] = report.ssim;
    j["slice_rmse"] = report.slice_rmse;
    j["retained_begin"] = report.retained_begin;
    j["retained_end"] = report.retained_end;
    j["turn_start_slices"] = report.turn_start_slices;
    j["ssim_protocol"] = report.ssim_protocol;
    return j.dump(2);
}

std::string eval_report_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "slice_index,rmse\n";
    for (std::size_t i = 0; i < report.slice_rmse.size(); ++i)
        out << report.retained_begin + int(i) << "," << report.slice_rmse[i] << "\n";
    return out.str();
}

}  // namespace hct
