#ifndef CELLTRACK_EVAL_HPP
#define CELLTRACK_EVAL_HPP

#include <span>
#include <string>
#include <vector>

#include "celltrack/assoc.hpp"
#include "celltrack/trajectory.hpp"

namespace celltrack {

struct EvalConfig {
    double match_radius = 3.0;  // detection <-> ground-truth correspondence, voxels
    bool contiguous_te = false; // TE over the longest contiguous run instead of coverage

    void validate() const {
        if (match_radius <= 0.0) throw std::invalid_argument("match_radius must be > 0");
    }
};

/// Optimal one-to-one correspondence between per-frame detections and
/// ground-truth points among pairs within radius (assoc.solve with
/// rho = 1 - d/radius). matches pairs (detection index, gt index).
AssociationResult match_frame(std::span<const Vec3> detections, std::span<const Vec3> gt_points,
                              double radius);

/// Tracking Accuracy: the fraction of ground-truth frame-to-frame links
/// (target g present at t and t+1) for which one predicted track is matched
/// to g at both frames.
double tracking_accuracy(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                         const EvalConfig& cfg);

/// Target Effectiveness: per ground-truth target, the fraction of its frames
/// covered by its dominant predicted track, averaged over targets.
double target_effectiveness(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                            const EvalConfig& cfg);

struct FramePrecisionRecall {
    int frame = 0;
    int n_pred = 0;
    int n_gt = 0;
    int n_matched = 0;
    double precision = 1.0;
    double recall = 1.0;
};

struct EvalReport {
    double ta = 0.0;
    double te = 0.0;
    double mean_precision = 1.0;
    double mean_recall = 1.0;
    std::vector<FramePrecisionRecall> frames;
};

EvalReport evaluate(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                    const EvalConfig& cfg);

/// Report CSV: a metric,value block followed by per-frame precision/recall rows.
void write_eval_report_csv(const EvalReport& report, const std::string& path);

}  // namespace celltrack

#endif
