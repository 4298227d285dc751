#ifndef CELLTRACK_TRACK_HPP
#define CELLTRACK_TRACK_HPP

#include <memory>
#include <span>
#include <vector>

#include "celltrack/align.hpp"
#include "celltrack/assoc.hpp"
#include "celltrack/detect.hpp"
#include "celltrack/trajectory.hpp"

namespace celltrack {

/// Table-1-style ablation switches. With use_registration false the
/// displacement field is identically zero (warping is the identity); with
/// use_fine_tune false the per-pair optimization runs on a small iteration
/// budget instead of the full one; with use_pairwise false detection at t+1
/// sees only the image at t+1.
struct AblationFlags {
    bool use_registration = true;
    bool use_fine_tune = true;
    bool use_pairwise = true;
};

struct PipelineConfig {
    AlignConfig align;
    DetectConfig detect;
    double gate_radius = 10.0;
    AblationFlags ablation;

    Vec3 align_sigma{4.0, 4.0, 2.0};   // rendering sigma for the alignment pair
    int finetune_budget_iters = 50;    // cap when use_fine_tune is false
    bool warm_start_field = true;      // seed each pair from the previous field
    bool coarse_to_fine = false;       // optional 2x seeding stage
    int min_track_length = 1;          // export filter
    bool confidence_weighted_assoc = false;
    int threads = 0;                   // internal slab parallelism; 0 = auto

    void validate() const {
        align.validate();
        detect.validate();
        if (gate_radius <= 0.0) throw std::invalid_argument("gate_radius must be > 0");
        if (finetune_budget_iters < 1) {
            throw std::invalid_argument("finetune_budget_iters must be >= 1");
        }
        if (min_track_length < 1) throw std::invalid_argument("min_track_length must be >= 1");
    }
};

/// What one frame-to-frame step did, for logs and diagnostics.
struct StepTrace {
    int source_frame = 0;  // the t of the t -> t+1 pair
    std::vector<AlignIteration> align_log;
    int n_detections = 0;
    int n_matches = 0;
    int n_births = 0;
    int n_deaths = 0;
};

/// Frame-by-frame tracker state: detections at the current frame, the live
/// track tails, and (when warm starting) the last displacement field.
class Tracker {
public:
    explicit Tracker(const PipelineConfig& cfg, const HeatmapEstimator* estimator = nullptr);

    /// Seeds tracks from detections in the first frame.
    void start(const Volume3D& first_frame, int frame_index = 0);

    /// Advances from the current frame t to t+1: preliminary detection,
    /// alignment, prior regeneration, pairwise fusion, final detection,
    /// gated one-to-one association, and track bookkeeping.
    StepTrace step(const Volume3D& next_frame);

    int current_frame() const { return frame_; }
    const DetectionSet& current_detections() const { return detections_; }

    /// All trajectories (including closed ones), sorted by cell id and
    /// filtered by cfg.min_track_length.
    std::vector<Trajectory> trajectories() const;

private:
    PipelineConfig cfg_;
    const HeatmapEstimator* estimator_;
    MatchedFilterEstimator default_estimator_;

    bool started_ = false;
    int frame_ = 0;
    GridDims dims_;
    DetectionSet detections_;
    std::vector<std::int64_t> det_track_;  // per current detection: index into tracks_
    std::vector<Trajectory> tracks_;
    DisplacementField last_field_;
    bool have_last_field_ = false;
};

struct RunResult {
    std::vector<Trajectory> trajectories;
    std::vector<StepTrace> traces;
};

/// Runs the full loop over a sequence (>= 2 frames, uniform dims; a dims
/// mismatch raises std::invalid_argument naming the frame).
RunResult run_sequence(std::span<const Volume3D> volumes, const PipelineConfig& cfg,
                       const HeatmapEstimator* estimator = nullptr);

}  // namespace celltrack

#endif
