#include "hct/train.hpp"

#include <cmath>
#include <cstring>

#include "hct/rng.hpp"

namespace hct {

double window_loss(const Volume& f, const Volume& truth, int slice_begin, Volume& grad_out) {
    const std::size_t plane = std::size_t(f.spec.height) * f.spec.width;
    const std::size_t n = f.data.size();
    const double* t = truth.data.data() + slice_begin * plane;
    grad_out = Volume(f.spec);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = f.data[i] - t[i];
        loss += d * d;
        grad_out.data[i] = 2.0 * d / double(n);
    }
    return loss / double(n);
}

TrainResult train(const std::vector<TrainScan>& scans, const HelicalGeometry& geom,
                  const TurnPartition& partition, const VolumeSpec& spec,
                  const NetworkParams& init, const TrainConfig& cfg,
                  const TrainCallback& progress) {
    cfg.validate();
    if (scans.empty()) throw std::invalid_argument("train: empty dataset");
    const int ns = partition.num_turns();
    if (cfg.window > ns)
        throw std::invalid_argument("train: window exceeds the scan's complete turn count");
    for (const auto& s : scans) {
        if (!s.truth.spec.same_grid(spec))
            throw std::invalid_argument("train: scan volume grid mismatch");
        if (s.g.num_angles != geom.num_angles())
            throw std::invalid_argument("train: scan data does not match the geometry");
    }

    TrainResult result;
    result.params = init;
    AdamConfig adam;
    adam.lr0 = cfg.lr0;
    adam.total_steps = cfg.iterations;
    AdamState opt;

    const int num_starts = ns - cfg.window + 1;
    CounterRng rng(cfg.rng_seed, 0x747261696eull);  // sampling stream

    for (int step = 0; step < cfg.iterations; ++step) {
        GradientTape batch_tape = result.params.zero_like();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int scan_idx = int(rng.next_below(scans.size()));
            const int q = int(rng.next_below(std::size_t(num_starts)));
            const TrainScan& scan = scans[scan_idx];

            const WindowView w = make_window(geom, partition, spec, q, cfg.window);
            LpdState state = zero_state(w);
            Sinogram g_window(w.angle_end - w.angle_begin, scan.g.num_rows, scan.g.num_cols);
            const std::size_t proj = std::size_t(scan.g.num_rows) * scan.g.num_cols;
            std::memcpy(g_window.data.data(), scan.g.data.data() + w.angle_begin * proj,
                        g_window.size() * sizeof(double));

            ilpdh_forward(state, g_window, result.params, w);

            Volume loss_grad;
            const double loss = window_loss(state.f, scan.truth, w.slice_begin, loss_grad);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: non-finite loss at step " +
                                         std::to_string(step) + " (scan " +
                                         std::to_string(scan_idx) + ", window " +
                                         std::to_string(q) + ")");
            batch_loss += loss;

            const GradientTape tape = ilpdh_backward_invertible(state, loss_grad, g_window,
                                                                result.params, w);
            std::vector<double> flat;
            flat.reserve(tape.num_params());
            tape.for_each([&](const double& v) { flat.push_back(v); });
            std::size_t k = 0;
            batch_tape.for_each([&](double& v) { v += flat[k++] / cfg.batch_size; });
        }
        batch_loss /= cfg.batch_size;
        adam_step(result.params, batch_tape, opt, step, adam);
        result.loss_trace.push_back(batch_loss);
        if (progress) progress(step, batch_loss, cosine_lr(adam, step));
    }
    return result;
}

}  // namespace hct
