#include "celltrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "celltrack/rng.hpp"

namespace celltrack {

namespace {

constexpr double kTau = 6.283185307179586477;
constexpr double kBoundsMargin = 2.0;

struct CellSeed {
    double s;        // body parameter in [0,1]
    Vec3 offset;     // fixed lateral offset from the centerline
    double contrast;
};

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();

    const double ax = cfg.bend_amplitude * cfg.transverse_fraction;
    const double ay = cfg.bend_amplitude;
    const double az = std::min(cfg.bend_amplitude * 0.06, cfg.dims.depth / 8.0);

    // Body layout: the worm runs along y; keep the swept envelope inside the
    // volume with room for the per-frame drift.
    const double off_x = 6.0, off_y = 4.0;
    const double z_budget = cfg.dims.depth / 2.0 - 1.0 - kBoundsMargin - az;
    if (z_budget < 0.2) {
        throw std::invalid_argument(
            "synth: volume too shallow for the z sway; reduce bend_amplitude or grow dims_z");
    }
    const double off_z = std::min(2.5, z_budget);
    const double drift_span_x = cfg.drift.x * (cfg.n_frames - 1);
    const double drift_span_y = cfg.drift.y * (cfg.n_frames - 1);
    const double cx = cfg.dims.width / 2.0 - drift_span_x / 2.0;
    const double cz = cfg.dims.depth / 2.0;
    const double y_margin = ay + off_y + kBoundsMargin + 1.0;
    const double y0 = y_margin + std::max(0.0, -cfg.drift.y * (cfg.n_frames - 1));
    const double y_span = cfg.dims.height - y0 - y_margin - std::max(0.0, drift_span_y);
    if (y_span < 1.0) {
        throw std::invalid_argument(
            "synth: bend amplitude/drift leave no room for the body; reduce bend_amplitude");
    }

    CounterRng place_rng(cfg.seed, 1);
    CounterRng contrast_rng(cfg.seed, 2);

    // A few deliberately touching pairs: every 7th cell snuggles the previous one.
    std::vector<CellSeed> cells(static_cast<std::size_t>(cfg.n_cells));
    for (int i = 0; i < cfg.n_cells; ++i) {
        auto& c = cells[static_cast<std::size_t>(i)];
        const bool twin = cfg.touching_pairs && (i % 7 == 3) && i > 0;
        if (twin) {
            const auto& prev = cells[static_cast<std::size_t>(i - 1)];
            c.s = prev.s;
            c.offset = prev.offset + Vec3{place_rng.uniform(2.0, 3.0) * (place_rng.next_double() < 0.5 ? -1.0 : 1.0),
                                          place_rng.uniform(-1.5, 1.5), place_rng.uniform(-0.8, 0.8)};
            c.offset.x = std::clamp(c.offset.x, -off_x, off_x);
            c.offset.y = std::clamp(c.offset.y, -off_y, off_y);
            c.offset.z = std::clamp(c.offset.z, -off_z, off_z);
        } else {
            c.s = (i + 0.5) / cfg.n_cells + place_rng.uniform(-0.35, 0.35) / cfg.n_cells;
            c.s = std::clamp(c.s, 0.0, 1.0);
            c.offset = {place_rng.uniform(-off_x, off_x), place_rng.uniform(-off_y, off_y),
                        place_rng.uniform(-off_z, off_z)};
        }
    }

    const int low_count = static_cast<int>(std::lround(cfg.low_contrast_fraction * cfg.n_cells));
    std::vector<char> is_low(static_cast<std::size_t>(cfg.n_cells), 0);
    for (int j = 0; j < low_count; ++j) {
        const int idx = static_cast<int>((j + 0.5) * cfg.n_cells / std::max(1, low_count));
        is_low[static_cast<std::size_t>(std::min(idx, cfg.n_cells - 1))] = 1;
    }
    for (int i = 0; i < cfg.n_cells; ++i) {
        const double hi_band = contrast_rng.uniform(0.6 * cfg.contrast_max, cfg.contrast_max);
        cells[static_cast<std::size_t>(i)].contrast =
            is_low[static_cast<std::size_t>(i)] ? cfg.contrast_min : std::max(cfg.contrast_min, hi_band);
    }

    auto position = [&](const CellSeed& c, int t) -> Vec3 {
        const double phase = kTau * (cfg.bend_spatial_freq * c.s - cfg.bend_temporal_freq * t);
        return Vec3{cx + c.offset.x + ax * std::sin(phase + kTau / 6.0),
                    y0 + c.s * y_span + c.offset.y + ay * std::sin(phase),
                    cz + c.offset.z + az * std::sin(phase + kTau / 4.0)} +
               cfg.drift * static_cast<double>(t);
    };

    SynthResult out;
    out.ground_truth.resize(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out.ground_truth[i].cell_id = static_cast<std::int64_t>(i);
    }

    HeatmapParams render_params;
    render_params.sigma = cfg.blob_sigma;
    render_params.combine = HeatmapParams::Combine::Max;
    render_params.cutoff_sigmas = 8.0;

    std::vector<Vec3> points(cells.size());
    std::vector<double> amps(cells.size());
    out.frames.reserve(static_cast<std::size_t>(cfg.n_frames));
    for (int t = 0; t < cfg.n_frames; ++t) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const Vec3 p = position(cells[i], t);
            if (p.x < kBoundsMargin || p.x > cfg.dims.width - 1 - kBoundsMargin ||
                p.y < kBoundsMargin || p.y > cfg.dims.height - 1 - kBoundsMargin ||
                p.z < kBoundsMargin || p.z > cfg.dims.depth - 1 - kBoundsMargin) {
                throw std::invalid_argument("synth: cell " + std::to_string(i) + " leaves the volume at frame " +
                                            std::to_string(t) + "; reduce bend_amplitude or drift");
            }
            points[i] = p;
            amps[i] = cells[i].contrast;
            out.ground_truth[i].samples.push_back({t, p, 1.0});
        }

        Volume3D frame = render_heatmap(points, amps, cfg.dims, render_params);
        // Noise stream is keyed by (seed, frame) so frames are independent and
        // reproducible in any rendering order.
        CounterRng noise(cfg.seed, 1000 + static_cast<std::uint64_t>(t));
        float* data = frame.data().data();
        const std::size_t n = frame.voxel_count();
        for (std::size_t i = 0; i < n; ++i) {
            double v = data[i] + cfg.background;
            if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise.next_gaussian();
            data[i] = static_cast<float>(std::max(0.0, v));
        }
        out.frames.push_back(std::move(frame));
    }
    return out;
}

}  // namespace celltrack
