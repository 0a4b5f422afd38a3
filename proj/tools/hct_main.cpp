#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hct/geometry.hpp"
#include "hct/ilpdh.hpp"
#include "hct/io.hpp"
#include "hct/metrics.hpp"
#include "hct/nn.hpp"
#include "hct/parallel.hpp"
#include "hct/projector.hpp"
#include "hct/recon.hpp"
#include "hct/rng.hpp"
#include "hct/simulation.hpp"
#include "hct/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

// exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical failure
constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericalError = 3;

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << text;
    }
    fs::rename(tmp, path);
}

// Collects inputs/outputs/seeds and writes the reproducibility manifest
// atomically when the command finishes.
class Manifest {
  public:
    Manifest(std::string command, int argc, char** argv) : start_(clock::now()) {
        j_["command"] = std::move(command);
        j_["version"] = kVersion;
        j_["threads"] = hct::num_threads();
        json args = json::array();
        for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
        j_["argv"] = args;
    }
    void input(const std::string& role, const std::string& path) {
        j_["inputs"][role] = {{"path", path}, {"digest", hct::file_digest(path)}};
    }
    void output(const std::string& role, const std::string& path) {
        j_["outputs"][role] = {{"path", path}, {"digest", hct::file_digest(path)}};
    }
    void seed(const std::string& name, std::uint64_t value) { j_["seeds"][name] = value; }
    void note(const std::string& key, const json& value) { j_[key] = value; }
    void write(const std::string& path) {
        using std::chrono::duration_cast;
        using std::chrono::milliseconds;
        j_["wall_ms"] = duration_cast<milliseconds>(clock::now() - start_).count();
        write_text_atomic(path, j_.dump(2) + "\n");
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
    json j_;
};

std::string pad3(int i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return buf;
}

hct::VolumeSpec volume_spec_from_json(const json& v) {
    hct::VolumeSpec spec;
    spec.width = v.at("width").get<int>();
    spec.height = v.at("height").get<int>();
    spec.num_slices = v.at("num_slices").get<int>();
    spec.dx = v.value("dx", 1.0);
    spec.dy = v.value("dy", 1.0);
    spec.dz = v.value("dz", 1.0);
    spec.z_origin = v.value("z_origin", 0.0);
    spec.validate();
    return spec;
}

std::vector<std::string> list_files(const std::string& dir, const std::string& prefix,
                                    const std::string& ext) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind(prefix, 0) == 0 && name.size() > ext.size() &&
            name.compare(name.size() - ext.size(), ext.size(), ext) == 0)
            out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---- phantom --------------------------------------------------------------

int cmd_phantom(const std::string& spec_path, const std::string& out_dir, int count,
                std::uint64_t seed, int argc, char** argv) {
    Manifest manifest("phantom", argc, argv);
    manifest.input("spec", spec_path);
    manifest.seed("phantom", seed);
    const hct::PhantomSpec base = hct::phantom_spec_from_json(read_text(spec_path));
    fs::create_directories(out_dir);

    for (int i = 0; i < count; ++i) {
        hct::PhantomSpec spec;
        if (!base.ellipsoids.empty() && count == 1) {
            spec = base;  // explicit scene: rasterize as given
        } else {
            spec = hct::random_phantom(seed + std::uint64_t(i), base.volume);
            spec.background_hu = base.background_hu != 0 ? base.background_hu
                                                         : spec.background_hu;
        }
        const hct::Volume vol = hct::make_phantom(spec);
        const std::string stem = out_dir + "/phantom_" + pad3(i);
        hct::write_volume(stem + ".vol", vol);
        write_text_atomic(stem + ".spec.json", hct::phantom_spec_to_json(spec) + "\n");
        manifest.output("phantom_" + pad3(i), stem + ".vol");
    }
    manifest.note("count", count);
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const std::string& dataset, const std::string& geometry_path,
                 const std::string& out_dir, double photons, std::uint64_t seed, int argc,
                 char** argv) {
    if (photons <= 0) throw std::invalid_argument("--photons must be > 0");
    Manifest manifest("simulate", argc, argv);
    manifest.input("geometry", geometry_path);
    manifest.seed("noise", seed);

    const auto vols = list_files(dataset, "phantom_", ".vol");
    if (vols.empty()) throw std::invalid_argument("no phantom_*.vol files in " + dataset);
    fs::create_directories(out_dir);

    hct::HelicalGeometry geom = hct::geometry_from_json(read_text(geometry_path));
    const hct::Volume first = hct::read_volume(vols[0]);
    geom = hct::truncate_trajectory(geom, first.spec);
    const std::string trunc_path = out_dir + "/geometry.json";
    write_text_atomic(trunc_path, hct::geometry_to_json(geom) + "\n");
    manifest.output("geometry", trunc_path);

    for (std::size_t i = 0; i < vols.size(); ++i) {
        const hct::Volume hu = hct::read_volume(vols[i]);
        if (!hu.spec.same_grid(first.spec))
            throw std::invalid_argument("simulate: mixed volume grids in the dataset");
        const hct::Volume mu = hct::hu_to_mu(hu);
        hct::DoseModel dose;
        dose.photons_per_pixel = photons;
        dose.rng_seed = seed + i;
        hct::Sinogram g = hct::simulate_data(mu, geom, dose);
        g.geom_id = hct::geometry_digest(geom);
        const std::string stem = out_dir + "/" + pad3(int(i));
        hct::write_sinogram(stem + ".sin", g);
        hct::write_volume(out_dir + "/mu_" + pad3(int(i)) + ".vol", mu);
        manifest.input("phantom_" + pad3(int(i)), vols[i]);
        manifest.output("sino_" + pad3(int(i)), stem + ".sin");
    }
    manifest.note("photons_per_pixel", photons);
    manifest.write(out_dir + "/manifest.json");
    return 0;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const std::string& dataset, const std::string& preset_path, int steps_override,
              const std::string& out_ckpt, std::uint64_t seed_override, bool has_seed,
              int argc, char** argv) {
    Manifest manifest("train", argc, argv);
    manifest.input("preset", preset_path);
    hct::MethodConfig cfg = hct::method_config_from_json(read_text(preset_path));
    if (steps_override > 0) cfg.train.iterations = steps_override;
    if (has_seed) cfg.train.rng_seed = seed_override;
    manifest.seed("train", cfg.train.rng_seed);

    const hct::HelicalGeometry geom =
        hct::geometry_from_json(read_text(dataset + "/geometry.json"));
    const auto mu_files = list_files(dataset, "mu_", ".vol");
    if (mu_files.empty()) throw std::invalid_argument("no mu_*.vol files in " + dataset);

    std::vector<hct::TrainScan> scans;
    hct::VolumeSpec spec;
    for (std::size_t i = 0; i < mu_files.size(); ++i) {
        hct::TrainScan s;
        s.truth = hct::read_volume(mu_files[i]);
        s.g = hct::read_sinogram(dataset + "/" + pad3(int(i)) + ".sin");
        if (i == 0) spec = s.truth.spec;
        scans.push_back(std::move(s));
        manifest.input("scan_" + pad3(int(i)), mu_files[i]);
    }

    const int nt = hct::min_subvolume_thickness(geom, spec);
    const hct::TurnPartition partition = hct::partition_turns(geom, spec, nt);
    if (partition.num_turns() < cfg.train.window)
        throw std::invalid_argument("train: dataset has fewer complete turns than the window");

    hct::NetworkParams init =
        hct::NetworkParams::default_init(cfg.recon.unrolled_iterations, cfg.train.rng_seed);
    init.op_scale = 1.0 / hct::estimate_op_norm(geom, spec, 20);

    const hct::TrainResult result = hct::train(
        scans, geom, partition, spec, init, cfg.train,
        [&](int step, double loss, double lr) {
            if (step % 50 == 0 || step + 1 == cfg.train.iterations)
                std::cerr << "step " << step << "  loss " << loss << "  lr " << lr << "\n";
        });

    hct::save_checkpoint(out_ckpt, result.params, cfg.train.rng_seed, cfg.train.iterations);
    std::ostringstream csv;
    csv << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
        csv << i << "," << result.loss_trace[i] << "\n";
    write_text_atomic(out_ckpt + ".loss.csv", csv.str());
    manifest.output("checkpoint", out_ckpt);
    manifest.output("loss_csv", out_ckpt + ".loss.csv");
    manifest.note("subvolume_thickness", nt);
    manifest.write(out_ckpt + ".manifest.json");
    return 0;
}

// ---- reconstruct ----------------------------------------------------------

int cmd_reconstruct(const std::string& sino_path, const std::string& geometry_path,
                    const std::string& method, const std::string& ckpt,
                    const std::string& like_path, const std::string& out_path,
                    const std::string& config_path, int argc, char** argv) {
    Manifest manifest("reconstruct", argc, argv);
    manifest.input("sinogram", sino_path);
    manifest.input("geometry", geometry_path);
    const hct::Sinogram g = hct::read_sinogram(sino_path);
    const hct::HelicalGeometry geom = hct::geometry_from_json(read_text(geometry_path));
    const hct::Volume like = hct::read_volume(like_path);
    const hct::VolumeSpec spec = like.spec;

    hct::MethodConfig cfg;
    if (!config_path.empty()) {
        cfg = hct::method_config_from_json(read_text(config_path));
        manifest.input("config", config_path);
    }

    hct::Volume out;
    if (method == "fbp") {
        out = hct::fbp_reconstruct(g, geom, spec, cfg.fbp_bandwidth_fraction);
    } else if (method == "huber") {
        out = hct::huber_reconstruct(g, geom, spec, cfg.huber);
    } else if (method == "ilpdh" || method == "g-ilpdh1" || method == "g-ilpdh3") {
        if (ckpt.empty())
            throw std::invalid_argument("--ckpt is required for learned methods");
        manifest.input("checkpoint", ckpt);
        const hct::NetworkParams params = hct::load_checkpoint(ckpt);
        cfg.recon.unrolled_iterations = params.unrolled_iterations;
        const int nt = hct::min_subvolume_thickness(geom, spec);
        const hct::TurnPartition partition = hct::partition_turns(geom, spec, nt);
        if (method == "ilpdh")
            out = hct::ilpdh_reconstruct(g, geom, partition, spec, params, cfg.recon);
        else
            out = hct::g_ilpdh_reconstruct(g, geom, partition, spec, params, cfg.recon,
                                           method == "g-ilpdh1" ? 1 : 3);
        manifest.note("subvolume_thickness", nt);
    } else {
        throw std::invalid_argument("unknown method: " + method);
    }

    hct::write_volume(out_path, out);
    manifest.note("method", method);
    manifest.output("volume", out_path);
    manifest.write(out_path + ".manifest.json");
    return 0;
}

// ---- evaluate -------------------------------------------------------------

int cmd_evaluate(const std::string& recon_path, const std::string& truth_path,
                 const std::string& geometry_path, int discard, int train_turns,
                 const std::string& out_path, int argc, char** argv) {
    Manifest manifest("evaluate", argc, argv);
    manifest.input("recon", recon_path);
    manifest.input("truth", truth_path);
    hct::Volume recon = hct::read_volume(recon_path);
    hct::Volume truth = hct::read_volume(truth_path);
    if (recon.spec.num_slices != truth.spec.num_slices &&
        recon.spec.num_slices < truth.spec.num_slices) {
        // reconstruction on the sub-volume union: align by z origin
        const int off = int(std::lround((recon.spec.z_origin - truth.spec.z_origin) /
                                        truth.spec.dz));
        if (off < 0 || off + recon.spec.num_slices > truth.spec.num_slices)
            throw std::invalid_argument("evaluate: reconstruction range outside the truth");
        hct::Volume cropped;
        hct::VolumeSpec cs = recon.spec;
        cropped = hct::Volume(cs);
        const std::size_t plane = std::size_t(cs.height) * cs.width;
        std::copy(truth.data.begin() + off * plane,
                  truth.data.begin() + (off + cs.num_slices) * plane, cropped.data.begin());
        truth = std::move(cropped);
    }
    hct::EvalReport report = hct::evaluate(recon, truth, discard);

    json extra;
    if (!geometry_path.empty()) {
        manifest.input("geometry", geometry_path);
        const hct::HelicalGeometry geom = hct::geometry_from_json(read_text(geometry_path));
        const int nt = hct::min_subvolume_thickness(geom, truth.spec);
        const hct::TurnPartition partition = hct::partition_turns(geom, truth.spec, nt);
        for (const auto& r : partition.subvolume_ranges)
            report.turn_start_slices.push_back(r.first);
        if (partition.num_turns() > train_turns)
            extra["slice_rmse_stability"] =
                hct::slice_rmse_stability(report, partition, train_turns);
    }

    json j = json::parse(hct::eval_report_to_json(report));
    for (auto& [k, v] : extra.items()) j[k] = v;
    write_text_atomic(out_path, j.dump(2) + "\n");
    write_text_atomic(out_path + ".csv", hct::eval_report_to_csv(report));
    manifest.output("report", out_path);
    manifest.write(out_path + ".manifest.json");
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---- selftest -------------------------------------------------------------

struct SelfTest {
    int failures = 0;
    void check(const std::string& name, bool ok, const std::string& detail = "") {
        std::cout << (ok ? "PASS" : "FAIL") << "  " << name;
        if (!ok && !detail.empty()) std::cout << "  (" << detail << ")";
        std::cout << "\n";
        if (!ok) ++failures;
    }
};

int cmd_selftest(bool fault_adjoint) {
    SelfTest t;
    hct::set_adjoint_fault_injection(fault_adjoint);

    hct::DetectorSpec det{12, 6, 3.0, 3.0};
    const hct::HelicalGeometry geom =
        hct::build_geometry(2.0 * 3.14159265358979 / 24, {12.0}, 3.0, 60.0, 120.0, det, 0.0);
    hct::VolumeSpec spec;
    spec.width = spec.height = 10;
    spec.num_slices = 16;
    spec.dx = spec.dy = 2.0;
    spec.dz = 2.0;
    spec.z_origin = 3.0;

    hct::CounterRng rng(7, 0x73656c66ull);
    hct::Volume f(spec);
    for (double& v : f.data) v = rng.next_uniform(0.0, 1.0);
    hct::Sinogram u(geom.num_angles(), det.num_rows, det.num_cols);
    for (double& v : u.data) v = rng.next_uniform(-1.0, 1.0);

    // adjoint identity
    const hct::Sinogram af = hct::forward_project(f, geom);
    const hct::Volume atu = hct::back_project(u, geom, spec);
    double lhs = 0, rhs = 0, na = 0, nu = 0;
    for (std::size_t i = 0; i < af.size(); ++i) {
        lhs += af.data[i] * u.data[i];
        na += af.data[i] * af.data[i];
        nu += u.data[i] * u.data[i];
    }
    for (std::size_t i = 0; i < f.data.size(); ++i) rhs += f.data[i] * atu.data[i];
    const double adj_err = std::abs(lhs - rhs) / (std::sqrt(na) * std::sqrt(nu) + 1e-300);
    t.check("projector adjoint identity", adj_err <= 1e-12, "rel err " + std::to_string(adj_err));

    // parallel forward matches the serial reference bitwise
    const hct::Sinogram af_ref = hct::forward_project_ref(f, geom);
    t.check("parallel forward == serial reference", af.data == af_ref.data);
    const hct::Volume bp = hct::back_project(u, geom, spec);
    const hct::Volume bp_ref = hct::back_project_ref(u, geom, spec);
    t.check("parallel backprojection == serial reference", bp.data == bp_ref.data);

    // conv oracle
    {
        hct::Conv3dParams p(2, 3);
        hct::CounterRng crng(11, 1);
        for (double& w : p.weights) w = crng.next_uniform(-0.5, 0.5);
        for (double& b : p.bias) b = crng.next_uniform(-0.1, 0.1);
        hct::ChannelRaster in(2, 4, 5, 6), out1(3, 4, 5, 6), out2(3, 4, 5, 6);
        for (double& v : in.data) v = crng.next_uniform(-1.0, 1.0);
        hct::conv3d_forward(p, in, out1, true);
        hct::conv3d_forward_ref(p, in, out2, true);
        double err = 0;
        for (std::size_t i = 0; i < out1.size(); ++i)
            err = std::max(err, std::abs(out1.data[i] - out2.data[i]));
        t.check("conv3d matches naive reference", err <= 1e-12);
    }

    // invertibility round trip + gradient agreement
    {
        const int nt = hct::min_subvolume_thickness(geom, spec);
        const hct::TurnPartition part = hct::partition_turns(geom, spec, nt);
        const hct::WindowView w = hct::make_window(geom, part, spec, 0, part.num_turns());
        hct::NetworkParams params = hct::NetworkParams::default_init(1, 3);
        params.op_scale = 1.0 / hct::estimate_op_norm(geom, spec, 10);
        for (auto& blk : {&params.gamma[0], &params.lambda[0]})
            for (double& v : blk->layer3.weights) v = rng.next_uniform(-0.05, 0.05);

        hct::Sinogram g(w.angle_end - w.angle_begin, det.num_rows, det.num_cols);
        for (double& v : g.data) v = rng.next_uniform(0.0, 1.0);
        hct::LpdState state = hct::zero_state(w);
        const hct::LpdState initial = state;
        hct::ilpdh_forward(state, g, params, w);

        hct::Volume loss_grad(w.window_spec());
        for (double& v : loss_grad.data) v = rng.next_uniform(-1.0, 1.0);
        hct::LpdState run = state;
        const hct::GradientTape inv =
            hct::ilpdh_backward_invertible(run, loss_grad, g, params, w);
        double state_err = 0;
        for (std::size_t i = 0; i < run.f.data.size(); ++i)
            state_err = std::max(state_err, std::abs(run.f.data[i] - initial.f.data[i]));
        for (std::size_t i = 0; i < run.u.data.size(); ++i)
            state_err = std::max(state_err, std::abs(run.u.data[i] - initial.u.data[i]));
        t.check("invertible backprop restores the initial state", state_err <= 1e-9,
                "max err " + std::to_string(state_err));

        const hct::GradientTape ref =
            hct::ilpdh_backward_reference(initial, loss_grad, g, params, w);
        std::vector<double> a, b;
        inv.for_each([&](const double& v) { a.push_back(v); });
        ref.for_each([&](const double& v) { b.push_back(v); });
        double gmax = 0, diff = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            gmax = std::max(gmax, std::abs(b[i]));
            diff = std::max(diff, std::abs(a[i] - b[i]));
        }
        t.check("invertible gradients match stored-activation gradients",
                diff <= 1e-5 * std::max(gmax, 1e-12));
    }

    // gluing convexity
    {
        hct::VolumeSpec gs;
        gs.width = gs.height = 4;
        gs.num_slices = 7;
        std::vector<hct::GluePartial> parts;
        for (int c : {2, 4}) {
            hct::GluePartial p;
            hct::VolumeSpec ps = gs;
            ps.num_slices = 5;
            p.vol = hct::Volume(ps);
            for (double& v : p.vol.data) v = double(c);
            p.slice_begin = c - 2;
            p.z_c = c;
            p.z_t = 5;
            parts.push_back(std::move(p));
        }
        bool convex = true;
        const hct::Volume glued = hct::glue(parts, gs);
        for (double v : glued.data) convex = convex && v >= 2.0 && v <= 4.0;
        t.check("gluing output is a per-slice convex combination", convex);
    }

    hct::set_adjoint_fault_injection(false);
    std::cout << (t.failures == 0 ? "selftest: all checks passed"
                                  : "selftest: " + std::to_string(t.failures) + " check(s) failed")
              << "\n";
    return t.failures == 0 ? 0 : kNumericalError;
}

int classify_error(const std::exception& e) {
    const std::string msg = e.what();
    for (const char* k : {"non-finite", "objective increased", "underflow", "diverge"})
        if (msg.find(k) != std::string::npos) return kNumericalError;
    return kDataError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"helical cone-beam CT reconstruction toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker thread count (default: hardware, or HELICAL_THREADS)");

    // phantom
    auto* sp = app.add_subcommand("phantom", "generate phantom volumes");
    std::string p_spec, p_out = ".";
    int p_count = 1;
    std::uint64_t p_seed = 0;
    sp->add_option("spec", p_spec, "phantom spec JSON")->required();
    sp->add_option("--out", p_out, "output directory");
    sp->add_option("--count", p_count, "number of phantoms");
    sp->add_option("--seed", p_seed, "base RNG seed");

    // geometry
    auto* sg = app.add_subcommand("geometry", "write a helical geometry JSON");
    std::string g_out;
    double g_increment = 0.1309, g_pitch = 16.0, g_turns = 5.0, g_radius = 300.0, g_sdd = 600.0;
    double g_zstart = 0.0, g_colsp = 4.0, g_rowsp = 6.0;
    int g_cols = 64, g_rows = 8;
    sg->add_option("--out", g_out, "output JSON path")->required();
    sg->add_option("--angular-increment", g_increment, "radians between sources");
    sg->add_option("--pitch", g_pitch, "table feed per turn [mm]");
    sg->add_option("--turns", g_turns, "number of turns (may be fractional)");
    sg->add_option("--radius", g_radius, "source-to-isocenter distance [mm]");
    sg->add_option("--sdd", g_sdd, "source-to-detector distance [mm]");
    sg->add_option("--z-start", g_zstart, "source z at the first angle [mm]");
    sg->add_option("--det-cols", g_cols, "detector columns");
    sg->add_option("--det-rows", g_rows, "detector rows");
    sg->add_option("--col-spacing", g_colsp, "detector column spacing [mm]");
    sg->add_option("--row-spacing", g_rowsp, "detector row spacing [mm]");

    // simulate
    auto* ss = app.add_subcommand("simulate", "simulate low-dose data for a phantom dataset");
    std::string s_dataset, s_geometry, s_out = ".";
    double s_photons = 1e4;
    std::uint64_t s_seed = 0;
    ss->add_option("dataset", s_dataset, "directory with phantom_*.vol")->required();
    ss->add_option("geometry", s_geometry, "geometry JSON")->required();
    ss->add_option("--out", s_out, "output directory");
    ss->add_option("--photons", s_photons, "incident photons per detector cell (H0)");
    ss->add_option("--seed", s_seed, "base noise seed");

    // train
    auto* st = app.add_subcommand("train", "train the unrolled network");
    std::string t_dataset, t_preset, t_out = "checkpoint.ckpt";
    int t_steps = 0;
    std::uint64_t t_seed = 0;
    bool t_has_seed = false;
    st->add_option("dataset", t_dataset, "directory from `simulate`")->required();
    st->add_option("--preset", t_preset, "method preset JSON")->required();
    st->add_option("--steps", t_steps, "override the preset's iteration count");
    st->add_option("--seed", t_seed, "override the preset's RNG seed")
        ->each([&](const std::string&) { t_has_seed = true; });
    st->add_option("--out", t_out, "checkpoint output path");

    // reconstruct
    auto* sr = app.add_subcommand("reconstruct", "reconstruct a volume from a sinogram");
    std::string r_sino, r_geometry, r_method, r_ckpt, r_like, r_out = "recon.vol", r_config;
    sr->add_option("sinogram", r_sino, "input sinogram")->required();
    sr->add_option("geometry", r_geometry, "geometry JSON")->required();
    sr->add_option("--method", r_method, "fbp | huber | ilpdh | g-ilpdh1 | g-ilpdh3")
        ->required();
    sr->add_option("--ckpt", r_ckpt, "checkpoint for learned methods");
    sr->add_option("--like", r_like, "volume file defining the output grid")->required();
    sr->add_option("--out", r_out, "output volume path");
    sr->add_option("--config", r_config, "method preset JSON");

    // evaluate
    auto* se = app.add_subcommand("evaluate", "compute PSNR/SSIM/slice RMSE");
    std::string e_recon, e_truth, e_geometry, e_out = "report.json";
    int e_discard = 10, e_train_turns = 3;
    se->add_option("recon", e_recon, "reconstructed volume")->required();
    se->add_option("truth", e_truth, "ground-truth volume")->required();
    se->add_option("--geometry", e_geometry, "geometry JSON for turn markers and stability");
    se->add_option("--discard", e_discard, "slices to discard at each end");
    se->add_option("--train-turns", e_train_turns, "turns treated as the training regime");
    se->add_option("--out", e_out, "report JSON path");

    // selftest
    auto* sv = app.add_subcommand("selftest", "run built-in verification checks");
    bool v_fault = false;
    sv->add_flag("--fault-adjoint", v_fault, "perturb the adjoint to demonstrate detection");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kUsageError;
    }
    if (threads > 0) hct::set_num_threads(threads);

    try {
        if (*sp) return cmd_phantom(p_spec, p_out, p_count, p_seed, argc, argv);
        if (*sg) {
            hct::DetectorSpec det{g_cols, g_rows, g_colsp, g_rowsp};
            const hct::HelicalGeometry geom = hct::build_geometry(
                g_increment, {g_pitch}, g_turns, g_radius, g_sdd, det, g_zstart);
            write_text_atomic(g_out, hct::geometry_to_json(geom) + "\n");
            return 0;
        }
        if (*ss) return cmd_simulate(s_dataset, s_geometry, s_out, s_photons, s_seed, argc, argv);
        if (*st)
            return cmd_train(t_dataset, t_preset, t_steps, t_out, t_seed, t_has_seed, argc, argv);
        if (*sr)
            return cmd_reconstruct(r_sino, r_geometry, r_method, r_ckpt, r_like, r_out, r_config,
                                   argc, argv);
        if (*se)
            return cmd_evaluate(e_recon, e_truth, e_geometry, e_discard, e_train_turns, e_out,
                                argc, argv);
        if (*sv) return cmd_selftest(v_fault);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    }
    return kUsageError;
}
