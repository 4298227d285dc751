#include "celltrack/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include <CLI11.hpp>

#include "celltrack/version.hpp"

namespace fs = std::filesystem;

namespace celltrack::cli {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        // synth
        "dims_x", "dims_y", "dims_z", "n_cells", "n_frames", "bend_amplitude",
        "bend_temporal_freq", "bend_spatial_freq", "transverse_fraction", "touching_pairs",
        "blob_sigma_x",
        "blob_sigma_y", "blob_sigma_z", "contrast_min", "contrast_max", "low_contrast_fraction",
        "noise_sigma", "background", "drift_x", "drift_y", "drift_z", "seed",
        // pipeline
        "gamma", "align_lr", "align_max_iters", "align_update_tol", "align_sigma_x",
        "align_sigma_y", "align_sigma_z", "finetune_budget_iters", "warm_start_field",
        "coarse_to_fine", "peak_threshold", "nms_radius", "prior_weight", "heatmap_sigma_x",
        "heatmap_sigma_y", "heatmap_sigma_z", "subvoxel_refine", "gate_radius",
        "confidence_weighted_assoc", "min_track_length", "threads", "use_registration",
        "use_fine_tune", "use_pairwise",
        // eval
        "match_radius", "te_contiguous"};
    return keys;
}

void reject_unknown_keys(const FlatConfig& cfg) {
    for (const auto& [key, entry] : cfg.entries()) {
        if (key.rfind("meta_", 0) == 0) continue;
        if (!known_keys().count(key)) {
            throw ConfigError(entry.second, "line " + std::to_string(entry.second) +
                                                ": unknown config key \"" + key + "\"");
        }
    }
}

FlatConfig load_config_or_default(const std::string& path) {
    FlatConfig cfg = path.empty() ? FlatConfig{} : FlatConfig::parse_file(path);
    reject_unknown_keys(cfg);
    return cfg;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    bool ok = true;
    for (const auto& line : lines) {
        ok = ok && std::fputs(line.c_str(), fp) >= 0 && std::fputc('\n', fp) != EOF;
    }
    if (std::fclose(fp) != 0 || !ok) {
        throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

SynthConfig synth_config_from(const FlatConfig& cfg) {
    SynthConfig out;
    out.dims.width = cfg.get_int("dims_x", out.dims.width);
    out.dims.height = cfg.get_int("dims_y", out.dims.height);
    out.dims.depth = cfg.get_int("dims_z", out.dims.depth);
    out.n_cells = cfg.get_int("n_cells", out.n_cells);
    out.n_frames = cfg.get_int("n_frames", out.n_frames);
    out.bend_amplitude = cfg.get_double("bend_amplitude", out.bend_amplitude);
    out.bend_temporal_freq = cfg.get_double("bend_temporal_freq", out.bend_temporal_freq);
    out.bend_spatial_freq = cfg.get_double("bend_spatial_freq", out.bend_spatial_freq);
    out.transverse_fraction = cfg.get_double("transverse_fraction", out.transverse_fraction);
    out.touching_pairs = cfg.get_bool("touching_pairs", out.touching_pairs);
    out.blob_sigma.x = cfg.get_double("blob_sigma_x", out.blob_sigma.x);
    out.blob_sigma.y = cfg.get_double("blob_sigma_y", out.blob_sigma.y);
    out.blob_sigma.z = cfg.get_double("blob_sigma_z", out.blob_sigma.z);
    out.contrast_min = cfg.get_double("contrast_min", out.contrast_min);
    out.contrast_max = cfg.get_double("contrast_max", out.contrast_max);
    out.low_contrast_fraction = cfg.get_double("low_contrast_fraction", out.low_contrast_fraction);
    out.noise_sigma = cfg.get_double("noise_sigma", out.noise_sigma);
    out.background = cfg.get_double("background", out.background);
    out.drift.x = cfg.get_double("drift_x", out.drift.x);
    out.drift.y = cfg.get_double("drift_y", out.drift.y);
    out.drift.z = cfg.get_double("drift_z", out.drift.z);
    out.seed = cfg.get_u64("seed", out.seed);
    return out;
}

PipelineConfig pipeline_config_from(const FlatConfig& cfg) {
    PipelineConfig out;
    out.align.gamma = cfg.get_double("gamma", out.align.gamma);
    out.align.learning_rate = cfg.get_double("align_lr", out.align.learning_rate);
    out.align.max_iters = cfg.get_int("align_max_iters", out.align.max_iters);
    out.align.update_tol = cfg.get_double("align_update_tol", out.align.update_tol);
    out.align_sigma.x = cfg.get_double("align_sigma_x", out.align_sigma.x);
    out.align_sigma.y = cfg.get_double("align_sigma_y", out.align_sigma.y);
    out.align_sigma.z = cfg.get_double("align_sigma_z", out.align_sigma.z);
    out.finetune_budget_iters = cfg.get_int("finetune_budget_iters", out.finetune_budget_iters);
    out.warm_start_field = cfg.get_bool("warm_start_field", out.warm_start_field);
    out.coarse_to_fine = cfg.get_bool("coarse_to_fine", out.coarse_to_fine);
    out.detect.peak_threshold = cfg.get_double("peak_threshold", out.detect.peak_threshold);
    out.detect.nms_radius = cfg.get_double("nms_radius", out.detect.nms_radius);
    out.detect.prior_weight = cfg.get_double("prior_weight", out.detect.prior_weight);
    out.detect.sigma.x = cfg.get_double("heatmap_sigma_x", out.detect.sigma.x);
    out.detect.sigma.y = cfg.get_double("heatmap_sigma_y", out.detect.sigma.y);
    out.detect.sigma.z = cfg.get_double("heatmap_sigma_z", out.detect.sigma.z);
    out.detect.subvoxel_refine = cfg.get_bool("subvoxel_refine", out.detect.subvoxel_refine);
    out.gate_radius = cfg.get_double("gate_radius", out.gate_radius);
    out.confidence_weighted_assoc =
        cfg.get_bool("confidence_weighted_assoc", out.confidence_weighted_assoc);
    out.min_track_length = cfg.get_int("min_track_length", out.min_track_length);
    out.threads = cfg.get_int("threads", out.threads);
    out.ablation.use_registration = cfg.get_bool("use_registration", true);
    out.ablation.use_fine_tune = cfg.get_bool("use_fine_tune", true);
    out.ablation.use_pairwise = cfg.get_bool("use_pairwise", true);
    return out;
}

EvalConfig eval_config_from(const FlatConfig& cfg) {
    EvalConfig out;
    out.match_radius = cfg.get_double("match_radius", out.match_radius);
    out.contiguous_te = cfg.get_bool("te_contiguous", out.contiguous_te);
    return out;
}

namespace {

std::vector<std::string> synth_manifest(const SynthConfig& c, const std::string& out_dir) {
    return {
        "# celltrack run manifest (synth); usable as a config file",
        "meta_tool_version=" + std::string(kVersion),
        "meta_command=synth",
        "meta_out=" + out_dir,
        "dims_x=" + std::to_string(c.dims.width),
        "dims_y=" + std::to_string(c.dims.height),
        "dims_z=" + std::to_string(c.dims.depth),
        "n_cells=" + std::to_string(c.n_cells),
        "n_frames=" + std::to_string(c.n_frames),
        "bend_amplitude=" + fmt(c.bend_amplitude),
        "bend_temporal_freq=" + fmt(c.bend_temporal_freq),
        "bend_spatial_freq=" + fmt(c.bend_spatial_freq),
        "transverse_fraction=" + fmt(c.transverse_fraction),
        "touching_pairs=" + std::string(c.touching_pairs ? "1" : "0"),
        "blob_sigma_x=" + fmt(c.blob_sigma.x),
        "blob_sigma_y=" + fmt(c.blob_sigma.y),
        "blob_sigma_z=" + fmt(c.blob_sigma.z),
        "contrast_min=" + fmt(c.contrast_min),
        "contrast_max=" + fmt(c.contrast_max),
        "low_contrast_fraction=" + fmt(c.low_contrast_fraction),
        "noise_sigma=" + fmt(c.noise_sigma),
        "background=" + fmt(c.background),
        "drift_x=" + fmt(c.drift.x),
        "drift_y=" + fmt(c.drift.y),
        "drift_z=" + fmt(c.drift.z),
        "seed=" + std::to_string(c.seed),
    };
}

std::vector<std::string> track_manifest(const PipelineConfig& c, const TrackOptions& opt) {
    return {
        "# celltrack run manifest (track); usable as a config file",
        "meta_tool_version=" + std::string(kVersion),
        "meta_command=track",
        "meta_frames_dir=" + opt.frames_dir,
        "meta_out=" + opt.out_csv,
        "gamma=" + fmt(c.align.gamma),
        "align_lr=" + fmt(c.align.learning_rate),
        "align_max_iters=" + std::to_string(c.align.max_iters),
        "align_update_tol=" + fmt(c.align.update_tol),
        "align_sigma_x=" + fmt(c.align_sigma.x),
        "align_sigma_y=" + fmt(c.align_sigma.y),
        "align_sigma_z=" + fmt(c.align_sigma.z),
        "finetune_budget_iters=" + std::to_string(c.finetune_budget_iters),
        "warm_start_field=" + std::string(c.warm_start_field ? "1" : "0"),
        "coarse_to_fine=" + std::string(c.coarse_to_fine ? "1" : "0"),
        "peak_threshold=" + fmt(c.detect.peak_threshold),
        "nms_radius=" + fmt(c.detect.nms_radius),
        "prior_weight=" + fmt(c.detect.prior_weight),
        "heatmap_sigma_x=" + fmt(c.detect.sigma.x),
        "heatmap_sigma_y=" + fmt(c.detect.sigma.y),
        "heatmap_sigma_z=" + fmt(c.detect.sigma.z),
        "subvoxel_refine=" + std::string(c.detect.subvoxel_refine ? "1" : "0"),
        "gate_radius=" + fmt(c.gate_radius),
        "confidence_weighted_assoc=" + std::string(c.confidence_weighted_assoc ? "1" : "0"),
        "min_track_length=" + std::to_string(c.min_track_length),
        "threads=" + std::to_string(c.threads),
        "use_registration=" + std::string(c.ablation.use_registration ? "1" : "0"),
        "use_fine_tune=" + std::string(c.ablation.use_fine_tune ? "1" : "0"),
        "use_pairwise=" + std::string(c.ablation.use_pairwise ? "1" : "0"),
    };
}

}  // namespace

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              const std::string& seed_override) {
    SynthConfig synth_cfg;
    try {
        const FlatConfig cfg = load_config_or_default(config_path);
        synth_cfg = synth_config_from(cfg);
        if (!seed_override.empty()) {
            std::uint64_t seed = 0;
            auto [ptr, ec] =
                std::from_chars(seed_override.data(), seed_override.data() + seed_override.size(), seed);
            if (ec != std::errc() || ptr != seed_override.data() + seed_override.size()) {
                std::fprintf(stderr, "error: --seed is not an unsigned integer: %s\n",
                             seed_override.c_str());
                return kInputError;
            }
            synth_cfg.seed = seed;
        }
        synth_cfg.validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kInputError;
    }

    SynthResult result;
    try {
        result = generate(synth_cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kInputError;
    }

    try {
        fs::create_directories(out_dir);
        char name[32];
        for (std::size_t t = 0; t < result.frames.size(); ++t) {
            std::snprintf(name, sizeof(name), "frame_%04zu.cvol", t);
            save_volume(result.frames[t], (fs::path(out_dir) / name).string());
        }
        write_trajectories_csv(result.ground_truth, (fs::path(out_dir) / "gt.csv").string());
        write_lines((fs::path(out_dir) / "manifest.txt").string(),
                    synth_manifest(synth_cfg, out_dir));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    }
    std::printf("wrote %zu frames + gt.csv + manifest.txt to %s\n", result.frames.size(),
                out_dir.c_str());
    return kOk;
}

int cmd_track(const TrackOptions& opt) {
    PipelineConfig cfg;
    try {
        const FlatConfig fc = load_config_or_default(opt.config_path);
        cfg = pipeline_config_from(fc);
        if (opt.no_registration) cfg.ablation.use_registration = false;
        if (opt.no_finetune) cfg.ablation.use_fine_tune = false;
        if (opt.no_pairwise) cfg.ablation.use_pairwise = false;
        if (opt.threads > 0) cfg.threads = opt.threads;
        cfg.validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kInputError;
    }

    std::vector<std::string> frame_files;
    try {
        if (!fs::is_directory(opt.frames_dir)) {
            std::fprintf(stderr, "error: frames dir not found: %s\n", opt.frames_dir.c_str());
            return kInputError;
        }
        for (const auto& entry : fs::directory_iterator(opt.frames_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("frame_", 0) == 0 && name.size() > 5 &&
                name.compare(name.size() - 5, 5, ".cvol") == 0) {
                frame_files.push_back(entry.path().string());
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    }
    std::sort(frame_files.begin(), frame_files.end());
    if (frame_files.size() < 2) {
        std::fprintf(stderr, "error: need at least 2 frame_*.cvol files in %s (found %zu)\n",
                     opt.frames_dir.c_str(), frame_files.size());
        return kInputError;
    }

    std::vector<Volume3D> volumes;
    try {
        volumes.reserve(frame_files.size());
        for (const auto& f : frame_files) volumes.push_back(load_volume(f));
    } catch (const VolumeIoError& e) {
        std::fprintf(stderr, "%s: %s\n",
                     e.kind() == VolumeIoError::Kind::OpenFailed ? "io error" : "input error",
                     e.what());
        return e.kind() == VolumeIoError::Kind::OpenFailed ? kIoError : kInputError;
    }

    Tracker tracker(cfg);
    std::vector<StepTrace> traces;
    try {
        for (std::size_t k = 1; k < volumes.size(); ++k) {
            if (!volumes[k].same_dims(volumes[0])) {
                std::fprintf(stderr, "error: frame %zu dims mismatch\n", k);
                return kInputError;
            }
        }
        tracker.start(volumes[0], 0);
        for (std::size_t k = 1; k < volumes.size(); ++k) {
            traces.push_back(tracker.step(volumes[k]));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "pipeline error at frame %d: %s\n", tracker.current_frame() + 1,
                     e.what());
        return kPipelineError;
    }

    try {
        write_trajectories_csv(tracker.trajectories(), opt.out_csv);
        write_lines(opt.out_csv + ".manifest", track_manifest(cfg, opt));
        // Per-pair alignment logs in one CSV keyed by the pair's source frame.
        std::FILE* fp = std::fopen((opt.out_csv + ".align.csv").c_str(), "wb");
        if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open align log");
        std::fputs("pair,iter,total,sim,smooth,mean_update\n", fp);
        for (const auto& trace : traces) {
            for (const auto& it : trace.align_log) {
                std::fprintf(fp, "%d,%d,%.9g,%.9g,%.9g,%.9g\n", trace.source_frame, it.iter,
                             it.total, it.sim, it.smooth, it.mean_update);
            }
        }
        if (std::fclose(fp) != 0) {
            throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: align log");
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    }
    return kOk;
}

int cmd_eval(const std::string& pred_csv, const std::string& gt_csv,
             const std::string& config_path, const std::string& report_csv) {
    EvalConfig cfg;
    std::vector<Trajectory> pred, gt;
    try {
        const FlatConfig fc = load_config_or_default(config_path);
        cfg = eval_config_from(fc);
        cfg.validate();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kInputError;
    }
    try {
        pred = read_trajectories_csv(pred_csv);
        gt = read_trajectories_csv(gt_csv);
    } catch (const CsvError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kInputError;
    } catch (const VolumeIoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    }

    const EvalReport report = evaluate(pred, gt, cfg);
    std::printf("TA=%.4f TE=%.4f\n", report.ta, report.te);
    std::printf("precision=%.4f recall=%.4f\n", report.mean_precision, report.mean_recall);

    if (!report_csv.empty()) {
        try {
            write_eval_report_csv(report, report_csv);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "io error: %s\n", e.what());
            return kIoError;
        }
    }
    return kOk;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"heatmap-based 3D cell tracking over volumetric time-lapse data"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out_path, seed_str;

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark sequence");
    synth->add_option("--config", config_path, "flat key=value config file");
    synth->add_option("--out", out_path, "output directory")->required();
    synth->add_option("--seed", seed_str, "override the RNG seed");

    TrackOptions topt;
    auto* track = app.add_subcommand("track", "track a directory of frame_*.cvol volumes");
    track->add_option("--frames", topt.frames_dir, "input frames directory")->required();
    track->add_option("--config", topt.config_path, "flat key=value config file");
    track->add_option("--out", topt.out_csv, "output trajectory CSV")->required();
    track->add_flag("--no-registration", topt.no_registration, "disable alignment (R)");
    track->add_flag("--no-finetune", topt.no_finetune, "budgeted alignment instead of full (FT)");
    track->add_flag("--no-pairwise", topt.no_pairwise, "disable pairwise detection (PD)");
    track->add_option("--threads", topt.threads, "internal thread budget (0 = auto)");

    std::string pred_csv, gt_csv, report_csv;
    auto* eval = app.add_subcommand("eval", "score predicted trajectories against ground truth");
    eval->add_option("--pred", pred_csv, "predicted trajectory CSV")->required();
    eval->add_option("--gt", gt_csv, "ground-truth trajectory CSV")->required();
    eval->add_option("--config", config_path, "flat key=value config file");
    eval->add_option("--out", report_csv, "write the report CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    if (synth->parsed()) return cmd_synth(config_path, out_path, seed_str);
    if (track->parsed()) return cmd_track(topt);
    return cmd_eval(pred_csv, gt_csv, config_path, report_csv);
}

}  // namespace celltrack::cli
