#ifndef CELLTRACK_CLI_HPP
#define CELLTRACK_CLI_HPP

#include <string>
#include <vector>

#include "celltrack/config.hpp"
#include "celltrack/eval.hpp"
#include "celltrack/synth.hpp"
#include "celltrack/track.hpp"

namespace celltrack::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kInputError = 2,    // unparseable config, invalid values, missing inputs
    kIoError = 3,       // filesystem failures
    kPipelineError = 4  // runtime failure mid-run
};

/// Typed views of the flat configuration file.
SynthConfig synth_config_from(const FlatConfig& cfg);
PipelineConfig pipeline_config_from(const FlatConfig& cfg);
EvalConfig eval_config_from(const FlatConfig& cfg);

/// Generates a synthetic sequence: frame_%04d.cvol files, gt.csv, and
/// manifest.txt under out_dir.
int cmd_synth(const std::string& config_path, const std::string& out_dir,
              const std::string& seed_override);

/// Tracks a directory of frame_*.cvol files into a trajectory CSV, writing a
/// manifest and the per-pair alignment logs next to it.
struct TrackOptions {
    std::string frames_dir;
    std::string config_path;  // optional; defaults apply when empty
    std::string out_csv;
    bool no_registration = false;
    bool no_finetune = false;
    bool no_pairwise = false;
    int threads = 0;  // 0 = config / auto
};
int cmd_track(const TrackOptions& opt);

/// Scores a predicted trajectory CSV against ground truth; prints TA/TE and
/// precision/recall, optionally writing a report CSV.
int cmd_eval(const std::string& pred_csv, const std::string& gt_csv,
             const std::string& config_path, const std::string& report_csv);

/// Full argv entry point (subcommand dispatch).
int run_cli(int argc, const char* const* argv);

}  // namespace celltrack::cli

#endif
