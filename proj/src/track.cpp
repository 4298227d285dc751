#include "celltrack/track.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "celltrack/parallel.hpp"

namespace celltrack {

namespace {

Volume3D downsample2(const Volume3D& v) {
    const GridDims d = v.dims();
    const GridDims half{std::max(1, d.width / 2), std::max(1, d.height / 2), std::max(1, d.depth / 2)};
    Volume3D out(half, 0.0f);
    for (int z = 0; z < half.depth; ++z) {
        for (int y = 0; y < half.height; ++y) {
            for (int x = 0; x < half.width; ++x) {
                double acc = 0.0;
                int count = 0;
                for (int dz = 0; dz < 2; ++dz) {
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const int sx = 2 * x + dx, sy = 2 * y + dy, sz = 2 * z + dz;
                            if (!d.contains(sx, sy, sz)) continue;
                            acc += v.at(sx, sy, sz);
                            ++count;
                        }
                    }
                }
                out.at(x, y, z) = static_cast<float>(acc / std::max(1, count));
            }
        }
    }
    return out;
}

DisplacementField upsample2(const DisplacementField& f, GridDims full) {
    DisplacementField out(full);
    for (int z = 0; z < full.depth; ++z) {
        for (int y = 0; y < full.height; ++y) {
            for (int x = 0; x < full.width; ++x) {
                const Vec3 coarse{x / 2.0, y / 2.0, z / 2.0};
                out.set(x, y, z, f.sample(coarse) * 2.0);  // coarse voxels are 2x wide
            }
        }
    }
    return out;
}

}  // namespace

Tracker::Tracker(const PipelineConfig& cfg, const HeatmapEstimator* estimator)
    : cfg_(cfg), estimator_(estimator ? estimator : &default_estimator_) {
    cfg_.validate();
}

void Tracker::start(const Volume3D& first_frame, int frame_index) {
    if (cfg_.threads > 0) set_thread_budget(cfg_.threads);
    dims_ = first_frame.dims();
    frame_ = frame_index;
    const Volume3D response = estimator_->estimate(first_frame, cfg_.detect);
    detections_ = detect_peaks(response, cfg_.detect, frame_index);

    tracks_.clear();
    det_track_.clear();
    for (std::size_t i = 0; i < detections_.size(); ++i) {
        Trajectory t;
        t.cell_id = static_cast<std::int64_t>(tracks_.size());
        t.samples.push_back({frame_index, detections_.points[i], detections_.confidence[i]});
        det_track_.push_back(t.cell_id);
        tracks_.push_back(std::move(t));
    }
    have_last_field_ = false;
    started_ = true;
}

StepTrace Tracker::step(const Volume3D& next_frame) {
    if (!started_) throw std::logic_error("Tracker::step called before start");
    if (next_frame.dims() != dims_) {
        throw std::invalid_argument("frame " + std::to_string(frame_ + 1) +
                                    " dims mismatch within sequence");
    }
    if (cfg_.threads > 0) set_thread_budget(cfg_.threads);

    StepTrace trace;
    trace.source_frame = frame_;
    const int next_index = frame_ + 1;

    // (1) preliminary single-image heatmap at t+1
    const Volume3D response = estimator_->estimate(next_frame, cfg_.detect);

    // (2) per-pair alignment of the frame-t heatmap toward t+1
    DisplacementField field(dims_);
    if (cfg_.ablation.use_registration) {
        const DetectionSet prelim = detect_peaks(response, cfg_.detect, next_index);
        HeatmapParams align_params;
        align_params.sigma = cfg_.align_sigma;
        align_params.cutoff_sigmas = 6.0;
        const Volume3D fixed = render_heatmap(prelim.points, dims_, align_params);
        const Volume3D moving = render_heatmap(detections_.points, dims_, align_params);

        AlignConfig acfg = cfg_.align;
        if (!cfg_.ablation.use_fine_tune) {
            acfg.max_iters = std::min(acfg.max_iters, cfg_.finetune_budget_iters);
        }

        const DisplacementField* init = nullptr;
        DisplacementField coarse_init;
        if (cfg_.warm_start_field && have_last_field_) {
            init = &last_field_;
        } else if (cfg_.coarse_to_fine) {
            AlignConfig ccfg = acfg;
            ccfg.max_iters = std::max(1, acfg.max_iters / 2);
            ccfg.learning_rate = acfg.learning_rate * 2.0;
            AlignResult coarse = fine_tune(downsample2(fixed), downsample2(moving), ccfg, nullptr);
            coarse_init = upsample2(coarse.field, dims_);
            init = &coarse_init;
        }

        AlignResult ar = fine_tune(fixed, moving, acfg, init);
        trace.align_log = std::move(ar.log);
        field = std::move(ar.field);
        if (cfg_.warm_start_field) {
            last_field_ = field;
            have_last_field_ = true;
        }
    }

    // (3)+(4) prior regeneration and pairwise fusion
    Volume3D fused = response;
    if (cfg_.ablation.use_pairwise) {
        HeatmapParams prior_params;
        prior_params.sigma = cfg_.detect.sigma;
        prior_params.cutoff_sigmas = 6.0;
        const Volume3D prior = regenerate_prior(detections_, field, dims_, prior_params);
        fused = fuse_pairwise(response, prior, cfg_.detect.prior_weight);
    }

    // (5) final detection at t+1
    DetectionSet next_dets = detect_peaks(fused, cfg_.detect, next_index);
    trace.n_detections = static_cast<int>(next_dets.size());

    // (6) gated one-to-one association of warped detections
    std::vector<Vec3> warped(detections_.size());
    for (std::size_t i = 0; i < detections_.size(); ++i) {
        warped[i] = warp_point(detections_.points[i], field);
    }
    const AssociationProblem problem =
        cfg_.confidence_weighted_assoc
            ? build_hypotheses_weighted(warped, next_dets.points, cfg_.gate_radius,
                                        detections_.confidence, next_dets.confidence)
            : build_hypotheses(warped, next_dets.points, cfg_.gate_radius);
    const AssociationResult res = solve(problem);

    // (7) extend matched tracks, birth unmatched targets, close unmatched sources
    std::vector<std::int64_t> next_det_track(next_dets.size(), -1);
    for (const auto& [i, j] : res.matches) {
        const std::int64_t track = det_track_[static_cast<std::size_t>(i)];
        tracks_[static_cast<std::size_t>(track)].samples.push_back(
            {next_index, next_dets.points[static_cast<std::size_t>(j)],
             next_dets.confidence[static_cast<std::size_t>(j)]});
        next_det_track[static_cast<std::size_t>(j)] = track;
    }
    for (int j : res.unmatched_target) {
        Trajectory t;
        t.cell_id = static_cast<std::int64_t>(tracks_.size());
        t.samples.push_back({next_index, next_dets.points[static_cast<std::size_t>(j)],
                             next_dets.confidence[static_cast<std::size_t>(j)]});
        next_det_track[static_cast<std::size_t>(j)] = t.cell_id;
        tracks_.push_back(std::move(t));
    }
    trace.n_matches = static_cast<int>(res.matches.size());
    trace.n_births = static_cast<int>(res.unmatched_target.size());
    trace.n_deaths = static_cast<int>(res.unmatched_source.size());

    detections_ = std::move(next_dets);
    det_track_ = std::move(next_det_track);
    frame_ = next_index;
    return trace;
}

std::vector<Trajectory> Tracker::trajectories() const {
    std::vector<Trajectory> out;
    out.reserve(tracks_.size());
    for (const auto& t : tracks_) {
        if (static_cast<int>(t.length()) >= cfg_.min_track_length) out.push_back(t);
    }
    std::sort(out.begin(), out.end(),
              [](const Trajectory& a, const Trajectory& b) { return a.cell_id < b.cell_id; });
    return out;
}

RunResult run_sequence(std::span<const Volume3D> volumes, const PipelineConfig& cfg,
                       const HeatmapEstimator* estimator) {
    if (volumes.size() < 2) {
        throw std::invalid_argument("run_sequence requires at least 2 frames");
    }
    for (std::size_t k = 1; k < volumes.size(); ++k) {
        if (!volumes[k].same_dims(volumes[0])) {
            throw std::invalid_argument("frame " + std::to_string(k) + " dims mismatch");
        }
    }
    Tracker tracker(cfg, estimator);
    tracker.start(volumes[0], 0);
    RunResult result;
    result.traces.reserve(volumes.size() - 1);
    for (std::size_t k = 1; k < volumes.size(); ++k) {
        result.traces.push_back(tracker.step(volumes[k]));
    }
    result.trajectories = tracker.trajectories();
    return result;
}

}  // namespace celltrack
