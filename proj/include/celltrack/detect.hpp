#ifndef CELLTRACK_DETECT_HPP
#define CELLTRACK_DETECT_HPP

#include <string>
#include <vector>

#include "celltrack/field.hpp"
#include "celltrack/volume.hpp"

namespace celltrack {

/// Sub-voxel detections for one frame. Points are in-bounds, confidences are
/// the fused-heatmap values at the peaks (above the detection threshold), and
/// survivors of non-maximum suppression are pairwise at least nms_radius apart.
struct DetectionSet {
    int frame = 0;
    std::vector<Vec3> points;
    std::vector<double> confidence;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

struct DetectConfig {
    double peak_threshold = 0.05;  // in (0,1)
    double nms_radius = 3.0;       // voxels, >= 1
    double prior_weight = 0.3;     // w in [0,1]
    Vec3 sigma{2.0, 2.0, 1.0};     // matched-filter / heatmap sigma
    bool subvoxel_refine = true;   // 3-point quadratic fit per axis

    void validate() const {
        if (!(peak_threshold > 0.0 && peak_threshold < 1.0)) {
            throw std::invalid_argument("peak_threshold must be in (0,1)");
        }
        if (nms_radius < 1.0) throw std::invalid_argument("nms_radius must be >= 1");
        if (prior_weight < 0.0 || prior_weight > 1.0) {
            throw std::invalid_argument("prior_weight must be in [0,1]");
        }
        if (sigma.x <= 0.0 || sigma.y <= 0.0 || sigma.z <= 0.0) {
            throw std::invalid_argument("sigma components must be > 0");
        }
    }
};

/// Matched-filter cell position heatmap: the image is correlated with a
/// zero-mean Gaussian kernel of cfg.sigma and the response is normalized by
/// the local image energy within the kernel window (squared cosine
/// similarity, positive part). The response is contrast-invariant up to
/// noise: an isolated Gaussian blob of matching sigma scores ~1 at its
/// center regardless of amplitude, and structureless regions score 0.
Volume3D estimate_heatmap(const Volume3D& image, const DetectConfig& cfg);

/// Warps each detection through the field (Eq.-of-motion point map), drops
/// points leaving the volume, and renders a fresh Gaussian heatmap at the
/// survivors scaled by their confidences. Rendering anew keeps every prior
/// peak exactly Gaussian instead of warping the map itself.
Volume3D regenerate_prior(const DetectionSet& prev, const DisplacementField& field, GridDims dims,
                          const HeatmapParams& params);

/// Convex combination (1-w)*image_hm + w*prior_hm, clamped to [0,1].
Volume3D fuse_pairwise(const Volume3D& image_hm, const Volume3D& prior_hm, double w);

/// Extracts strict 26-neighborhood local maxima above cfg.peak_threshold,
/// refines them to sub-voxel accuracy when enabled, and greedily suppresses
/// any peak within cfg.nms_radius of a stronger one (descending value,
/// ties by lexicographic (z,y,x)).
DetectionSet detect_peaks(const Volume3D& hm, const DetectConfig& cfg, int frame = 0);

/// Heatmap estimation behind an interface so a learned estimator can be
/// substituted for the matched filter.
class HeatmapEstimator {
public:
    virtual ~HeatmapEstimator() = default;
    virtual Volume3D estimate(const Volume3D& image, const DetectConfig& cfg) const = 0;
};

class MatchedFilterEstimator final : public HeatmapEstimator {
public:
    Volume3D estimate(const Volume3D& image, const DetectConfig& cfg) const override {
        return estimate_heatmap(image, cfg);
    }
};

/// Detections as CSV: frame,x,y,z,confidence.
void write_detections_csv(const std::vector<DetectionSet>& sets, const std::string& path);

}  // namespace celltrack

#endif
