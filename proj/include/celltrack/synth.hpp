#ifndef CELLTRACK_SYNTH_HPP
#define CELLTRACK_SYNTH_HPP

#include <cstdint>
#include <vector>

#include "celltrack/trajectory.hpp"
#include "celltrack/volume.hpp"

namespace celltrack {

/// Synthetic worm-like sequence: cells seated along a parametric centerline
/// with fixed lateral offsets, moved per frame by a travelling sinusoidal
/// bend (transverse x sway plus a dominant longitudinal y wave) and a global
/// drift, rendered as anisotropic Gaussian blobs over a flat background with
/// additive noise. Deterministic given the seed.
struct SynthConfig {
    GridDims dims{64, 288, 16};
    int n_cells = 20;
    int n_frames = 30;

    double bend_amplitude = 26.0;      // longitudinal wave amplitude, voxels
    double bend_temporal_freq = 0.07;  // wave cycles per frame
    double bend_spatial_freq = 0.8;    // wave cycles along the body
    double transverse_fraction = 0.35; // x sway amplitude as a fraction of bend_amplitude

    bool touching_pairs = true;        // every 7th cell snuggles its predecessor

    Vec3 blob_sigma{2.0, 2.0, 1.0};
    double contrast_min = 0.15;        // low-contrast cells are drawn at this amplitude
    double contrast_max = 1.0;
    double low_contrast_fraction = 0.25;
    double noise_sigma = 0.06;
    double background = 0.08;          // flat pedestal keeping noise mostly unclipped
    Vec3 drift{0.15, 0.25, 0.0};       // per-frame global translation

    std::uint64_t seed = 7;

    void validate() const {
        if (dims.width <= 0 || dims.height <= 0 || dims.depth <= 0) {
            throw std::invalid_argument("synth dims must be positive");
        }
        if (n_cells < 1) throw std::invalid_argument("n_cells must be >= 1");
        if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
        if (contrast_min <= 0.0 || contrast_max < contrast_min) {
            throw std::invalid_argument("contrast range must satisfy 0 < c_min <= c_max");
        }
        if (low_contrast_fraction < 0.0 || low_contrast_fraction > 1.0) {
            throw std::invalid_argument("low_contrast_fraction must be in [0,1]");
        }
        if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
        if (background < 0.0) throw std::invalid_argument("background must be >= 0");
        if (bend_amplitude < 0.0) throw std::invalid_argument("bend_amplitude must be >= 0");
    }
};

struct SynthResult {
    std::vector<Volume3D> frames;
    std::vector<Trajectory> ground_truth;
};

/// Throws std::invalid_argument (advising a smaller amplitude) when any cell
/// would leave the volume at any frame.
SynthResult generate(const SynthConfig& cfg);

}  // namespace celltrack

#endif
