#ifndef CELLTRACK_ASSOC_HPP
#define CELLTRACK_ASSOC_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "celltrack/geometry.hpp"

namespace celltrack {

/// One gated association hypothesis i -> j with its score rho_ij.
struct Hypothesis {
    int source = 0;
    int target = 0;
    double distance = 0.0;
    double score = 0.0;
};

/// Gated hypothesis list between warped frame-t detections (sources) and
/// frame-t+1 detections (targets). Every hypothesis satisfies
/// distance < gate_radius and carries score in (0,1].
struct AssociationProblem {
    std::vector<Vec3> source;
    std::vector<Vec3> target;
    std::vector<Hypothesis> hypotheses;
    double gate_radius = 10.0;
};

/// One-to-one selection: each source and each target index appears in at
/// most one match (the conflict constraints).
struct AssociationResult {
    std::vector<std::pair<int, int>> matches;  // sorted by (source, target)
    std::vector<int> unmatched_source;         // tracks that end
    std::vector<int> unmatched_target;         // track births
    double objective = 0.0;                    // sum of selected scores
};

/// Lists every pair with Euclidean distance strictly below gate_radius,
/// scored rho = 1 - d / gate_radius. Empty hypothesis lists are valid.
AssociationProblem build_hypotheses(std::span<const Vec3> src, std::span<const Vec3> tgt,
                                    double gate_radius);

/// Confidence-weighted variant (optional scoring mode): multiplies each score
/// by sqrt(conf_src * conf_tgt).
AssociationProblem build_hypotheses_weighted(std::span<const Vec3> src,
                                             std::span<const Vec3> tgt, double gate_radius,
                                             std::span<const double> src_conf,
                                             std::span<const double> tgt_conf);

/// Exact maximizer of sum(rho_ij x_ij) subject to the one-use-per-detection
/// constraints, via successive max-gain augmenting paths on the gated
/// bipartite graph. The binary program's LP relaxation is integral on this
/// structure, so the result attains the relaxation optimum.
AssociationResult solve(const AssociationProblem& problem);

/// Exhaustive enumeration of feasible selections, for testing. Ties are
/// broken toward the lexicographically smallest sorted match list.
/// Throws std::invalid_argument for more than 25 hypotheses.
AssociationResult brute_force_oracle(const AssociationProblem& problem);

/// Debug dump: i,j,distance,score,selected.
void write_hypotheses_csv(const AssociationProblem& problem, const AssociationResult& result,
                          const std::string& path);

}  // namespace celltrack

#endif
