#include "celltrack/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <map>

#include "celltrack/volume.hpp"

namespace celltrack {

AssociationResult match_frame(std::span<const Vec3> detections, std::span<const Vec3> gt_points,
                              double radius) {
    if (radius <= 0.0) throw std::invalid_argument("match_frame: radius must be > 0");
    return solve(build_hypotheses(detections, gt_points, radius));
}

namespace {

struct FramePoints {
    std::vector<Vec3> pts;
    std::vector<int> owner;  // track index within its trajectory list
};

std::map<int, FramePoints> collect_frames(const std::vector<Trajectory>& tracks) {
    std::map<int, FramePoints> frames;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        for (const auto& s : tracks[t].samples) {
            auto& f = frames[s.frame];
            f.pts.push_back(s.pos);
            f.owner.push_back(static_cast<int>(t));
        }
    }
    return frames;
}

struct Assignments {
    // per gt track: frame -> pred track index, present only when matched
    std::vector<std::map<int, int>> gt_to_pred;
    std::vector<FramePrecisionRecall> frames;
};

Assignments assign(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                   double radius) {
    Assignments out;
    out.gt_to_pred.resize(gt.size());

    const auto pred_frames = collect_frames(pred);
    const auto gt_frames = collect_frames(gt);

    std::vector<int> all_frames;
    for (const auto& [f, _] : pred_frames) all_frames.push_back(f);
    for (const auto& [f, _] : gt_frames) all_frames.push_back(f);
    std::sort(all_frames.begin(), all_frames.end());
    all_frames.erase(std::unique(all_frames.begin(), all_frames.end()), all_frames.end());

    static const FramePoints kEmpty;
    for (int frame : all_frames) {
        const auto pit = pred_frames.find(frame);
        const auto git = gt_frames.find(frame);
        const FramePoints& p = pit == pred_frames.end() ? kEmpty : pit->second;
        const FramePoints& g = git == gt_frames.end() ? kEmpty : git->second;

        const AssociationResult res = match_frame(p.pts, g.pts, radius);
        for (const auto& [di, gi] : res.matches) {
            out.gt_to_pred[static_cast<std::size_t>(g.owner[static_cast<std::size_t>(gi)])][frame] =
                p.owner[static_cast<std::size_t>(di)];
        }

        FramePrecisionRecall pr;
        pr.frame = frame;
        pr.n_pred = static_cast<int>(p.pts.size());
        pr.n_gt = static_cast<int>(g.pts.size());
        pr.n_matched = static_cast<int>(res.matches.size());
        pr.precision = pr.n_pred == 0 ? 1.0 : static_cast<double>(pr.n_matched) / pr.n_pred;
        pr.recall = pr.n_gt == 0 ? 1.0 : static_cast<double>(pr.n_matched) / pr.n_gt;
        out.frames.push_back(pr);
    }
    return out;
}

double ta_from(const Assignments& as, const std::vector<Trajectory>& gt) {
    std::int64_t total_links = 0;
    std::int64_t tp = 0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        const auto& samples = gt[g].samples;
        const auto& matched = as.gt_to_pred[g];
        for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
            if (samples[k + 1].frame != samples[k].frame + 1) continue;  // gt links are consecutive
            ++total_links;
            const auto a = matched.find(samples[k].frame);
            const auto b = matched.find(samples[k + 1].frame);
            if (a != matched.end() && b != matched.end() && a->second == b->second) ++tp;
        }
    }
    return total_links == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(total_links);
}

double te_from(const Assignments& as, const std::vector<Trajectory>& gt, bool contiguous) {
    if (gt.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        const auto& samples = gt[g].samples;
        const auto& matched = as.gt_to_pred[g];
        if (samples.empty()) continue;
        int best = 0;
        if (contiguous) {
            int run = 0;
            int prev_track = -1;
            int prev_frame = std::numeric_limits<int>::min();
            for (const auto& s : samples) {
                const auto it = matched.find(s.frame);
                if (it == matched.end()) {
                    run = 0;
                    prev_track = -1;
                } else if (it->second == prev_track && s.frame == prev_frame + 1) {
                    ++run;
                } else {
                    run = 1;
                    prev_track = it->second;
                }
                prev_frame = s.frame;
                best = std::max(best, run);
            }
        } else {
            std::map<int, int> coverage;  // pred track -> frames covered
            for (const auto& s : samples) {
                const auto it = matched.find(s.frame);
                if (it != matched.end()) best = std::max(best, ++coverage[it->second]);
            }
        }
        sum += static_cast<double>(best) / static_cast<double>(samples.size());
    }
    return sum / static_cast<double>(gt.size());
}

}  // namespace

double tracking_accuracy(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                         const EvalConfig& cfg) {
    cfg.validate();
    return ta_from(assign(pred, gt, cfg.match_radius), gt);
}

double target_effectiveness(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                            const EvalConfig& cfg) {
    cfg.validate();
    return te_from(assign(pred, gt, cfg.match_radius), gt, cfg.contiguous_te);
}

EvalReport evaluate(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& gt,
                    const EvalConfig& cfg) {
    cfg.validate();
    const Assignments as = assign(pred, gt, cfg.match_radius);
    EvalReport report;
    report.ta = ta_from(as, gt);
    report.te = te_from(as, gt, cfg.contiguous_te);
    report.frames = as.frames;
    if (!report.frames.empty()) {
        double sp = 0.0, sr = 0.0;
        for (const auto& f : report.frames) {
            sp += f.precision;
            sr += f.recall;
        }
        report.mean_precision = sp / static_cast<double>(report.frames.size());
        report.mean_recall = sr / static_cast<double>(report.frames.size());
    }
    return report;
}

void write_eval_report_csv(const EvalReport& report, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    std::fputs("metric,value\n", fp);
    std::fprintf(fp, "TA,%.6f\n", report.ta);
    std::fprintf(fp, "TE,%.6f\n", report.te);
    std::fprintf(fp, "mean_precision,%.6f\n", report.mean_precision);
    std::fprintf(fp, "mean_recall,%.6f\n", report.mean_recall);
    std::fputs("frame,n_pred,n_gt,n_matched,precision,recall\n", fp);
    for (const auto& f : report.frames) {
        std::fprintf(fp, "%d,%d,%d,%d,%.6f,%.6f\n", f.frame, f.n_pred, f.n_gt, f.n_matched,
                     f.precision, f.recall);
    }
    if (std::fclose(fp) != 0) {
        throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
    }
}

}  // namespace celltrack
