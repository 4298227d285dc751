#include "celltrack/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "celltrack/volume.hpp"

namespace celltrack {

namespace {

void finalize_result(AssociationResult& result, std::size_t n_src, std::size_t n_tgt) {
    std::sort(result.matches.begin(), result.matches.end());
    std::vector<char> used_src(n_src, 0), used_tgt(n_tgt, 0);
    for (const auto& [i, j] : result.matches) {
        used_src[static_cast<std::size_t>(i)] = 1;
        used_tgt[static_cast<std::size_t>(j)] = 1;
    }
    result.unmatched_source.clear();
    result.unmatched_target.clear();
    for (std::size_t i = 0; i < n_src; ++i) {
        if (!used_src[i]) result.unmatched_source.push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < n_tgt; ++j) {
        if (!used_tgt[j]) result.unmatched_target.push_back(static_cast<int>(j));
    }
}

}  // namespace

AssociationProblem build_hypotheses(std::span<const Vec3> src, std::span<const Vec3> tgt,
                                    double gate_radius) {
    return build_hypotheses_weighted(src, tgt, gate_radius, {}, {});
}

AssociationProblem build_hypotheses_weighted(std::span<const Vec3> src, std::span<const Vec3> tgt,
                                             double gate_radius,
                                             std::span<const double> src_conf,
                                             std::span<const double> tgt_conf) {
    if (gate_radius <= 0.0) throw std::invalid_argument("gate_radius must be > 0");
    AssociationProblem problem;
    problem.source.assign(src.begin(), src.end());
    problem.target.assign(tgt.begin(), tgt.end());
    problem.gate_radius = gate_radius;
    const bool weighted = !src_conf.empty() && !tgt_conf.empty();
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = 0; j < tgt.size(); ++j) {
            const double d = distance(src[i], tgt[j]);
            if (d < gate_radius) {
                double score = 1.0 - d / gate_radius;
                if (weighted) score *= std::sqrt(src_conf[i] * tgt_conf[j]);
                problem.hypotheses.push_back(
                    {static_cast<int>(i), static_cast<int>(j), d, score});
            }
        }
    }
    return problem;
}

AssociationResult solve(const AssociationProblem& problem) {
    const int n = static_cast<int>(problem.source.size());
    const int m = static_cast<int>(problem.target.size());
    AssociationResult result;

    std::vector<int> match_src(static_cast<std::size_t>(n), -1);
    std::vector<int> match_tgt(static_cast<std::size_t>(m), -1);
    std::vector<double> match_score(static_cast<std::size_t>(n), 0.0);
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    constexpr double kGainEps = 1e-12;

    const int max_aug = std::min(n, m);
    for (int round = 0; round < max_aug; ++round) {
        // Max-gain alternating path: forward over unmatched hypotheses (+score),
        // backward over matched ones (-score). Intermediate matchings are
        // optimal at their cardinality, so there are no positive-gain cycles
        // and Bellman-Ford relaxation converges.
        std::vector<double> dist_src(static_cast<std::size_t>(n), kNegInf);
        std::vector<double> dist_tgt(static_cast<std::size_t>(m), kNegInf);
        std::vector<int> pred_tgt(static_cast<std::size_t>(m), -1);
        std::vector<int> pred_src(static_cast<std::size_t>(n), -1);
        for (int i = 0; i < n; ++i) {
            if (match_src[static_cast<std::size_t>(i)] < 0) dist_src[static_cast<std::size_t>(i)] = 0.0;
        }
        bool changed = true;
        int guard = n + m + 1;
        while (changed && guard-- > 0) {
            changed = false;
            for (const auto& hyp : problem.hypotheses) {
                const auto i = static_cast<std::size_t>(hyp.source);
                const auto j = static_cast<std::size_t>(hyp.target);
                if (match_src[i] == hyp.target) {
                    const double cand = dist_tgt[j] - hyp.score;
                    if (cand > dist_src[i]) {
                        dist_src[i] = cand;
                        pred_src[i] = hyp.target;
                        changed = true;
                    }
                } else if (dist_src[i] > kNegInf) {
                    const double cand = dist_src[i] + hyp.score;
                    if (cand > dist_tgt[j]) {
                        dist_tgt[j] = cand;
                        pred_tgt[j] = hyp.source;
                        changed = true;
                    }
                }
            }
        }

        int best_j = -1;
        double best_gain = kGainEps;
        for (int j = 0; j < m; ++j) {
            if (match_tgt[static_cast<std::size_t>(j)] >= 0) continue;
            if (dist_tgt[static_cast<std::size_t>(j)] > best_gain) {
                best_gain = dist_tgt[static_cast<std::size_t>(j)];
                best_j = j;
            }
        }
        if (best_j < 0) break;

        // Flip the alternating path ending at best_j.
        int j = best_j;
        for (;;) {
            const int i = pred_tgt[static_cast<std::size_t>(j)];
            const int prev_j = match_src[static_cast<std::size_t>(i)];
            match_src[static_cast<std::size_t>(i)] = j;
            match_tgt[static_cast<std::size_t>(j)] = i;
            if (prev_j < 0) break;
            j = prev_j;
        }
    }

    // Collect matches and the objective from the hypothesis scores.
    for (const auto& hyp : problem.hypotheses) {
        if (match_src[static_cast<std::size_t>(hyp.source)] == hyp.target) {
            // Guard against duplicate (i,j) hypotheses: count each match once.
            bool seen = false;
            for (const auto& mpair : result.matches) {
                if (mpair.first == hyp.source && mpair.second == hyp.target) {
                    seen = true;
                    break;
                }
            }
            if (!seen) {
                result.matches.emplace_back(hyp.source, hyp.target);
                result.objective += hyp.score;
            }
        }
    }
    finalize_result(result, problem.source.size(), problem.target.size());
    return result;
}

namespace {

struct OracleState {
    const std::vector<std::vector<const Hypothesis*>>* by_source;
    std::vector<double> suffix_best;
    std::vector<char> used_tgt;
    std::vector<std::pair<int, int>> current;
    double current_obj = 0.0;
    std::vector<std::pair<int, int>> best;
    double best_obj = -1.0;
    bool has_best = false;
};

void oracle_dfs(OracleState& st, std::size_t k) {
    const auto& groups = *st.by_source;
    if (st.has_best && st.current_obj + st.suffix_best[k] < st.best_obj - 1e-12) return;
    if (k == groups.size()) {
        std::vector<std::pair<int, int>> sorted = st.current;
        std::sort(sorted.begin(), sorted.end());
        const bool better =
            !st.has_best || st.current_obj > st.best_obj + 1e-12 ||
            (std::abs(st.current_obj - st.best_obj) <= 1e-12 && sorted < st.best);
        if (better) {
            st.best = std::move(sorted);
            st.best_obj = st.current_obj;
            st.has_best = true;
        }
        return;
    }
    // Option: leave this source unmatched.
    oracle_dfs(st, k + 1);
    for (const Hypothesis* hyp : groups[k]) {
        const auto j = static_cast<std::size_t>(hyp->target);
        if (st.used_tgt[j]) continue;
        st.used_tgt[j] = 1;
        st.current.emplace_back(hyp->source, hyp->target);
        st.current_obj += hyp->score;
        oracle_dfs(st, k + 1);
        st.current_obj -= hyp->score;
        st.current.pop_back();
        st.used_tgt[j] = 0;
    }
}

}  // namespace

AssociationResult brute_force_oracle(const AssociationProblem& problem) {
    if (problem.hypotheses.size() > 25) {
        throw std::invalid_argument("brute_force_oracle: instance too large (> 25 hypotheses)");
    }

    // Group hypotheses by source so enumeration walks feasible selections only.
    std::vector<int> sources;
    for (const auto& hyp : problem.hypotheses) sources.push_back(hyp.source);
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

    std::vector<std::vector<const Hypothesis*>> by_source(sources.size());
    for (const auto& hyp : problem.hypotheses) {
        const auto it = std::lower_bound(sources.begin(), sources.end(), hyp.source);
        by_source[static_cast<std::size_t>(it - sources.begin())].push_back(&hyp);
    }
    for (auto& group : by_source) {
        std::sort(group.begin(), group.end(), [](const Hypothesis* a, const Hypothesis* b) {
            return a->target < b->target;
        });
    }

    OracleState st;
    st.by_source = &by_source;
    st.suffix_best.assign(by_source.size() + 1, 0.0);
    for (std::size_t k = by_source.size(); k-- > 0;) {
        double best = 0.0;
        for (const Hypothesis* hyp : by_source[k]) best = std::max(best, hyp->score);
        st.suffix_best[k] = st.suffix_best[k + 1] + best;
    }
    st.used_tgt.assign(problem.target.size(), 0);
    oracle_dfs(st, 0);

    AssociationResult result;
    result.matches = st.has_best ? st.best : std::vector<std::pair<int, int>>{};
    result.objective = st.has_best ? std::max(0.0, st.best_obj) : 0.0;
    finalize_result(result, problem.source.size(), problem.target.size());
    return result;
}

void write_hypotheses_csv(const AssociationProblem& problem, const AssociationResult& result,
                          const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    std::fputs("i,j,distance,score,selected\n", fp);
    for (const auto& hyp : problem.hypotheses) {
        const bool selected =
            std::find(result.matches.begin(), result.matches.end(),
                      std::make_pair(hyp.source, hyp.target)) != result.matches.end();
        std::fprintf(fp, "%d,%d,%.6f,%.6f,%d\n", hyp.source, hyp.target, hyp.distance, hyp.score,
                     selected ? 1 : 0);
    }
    if (std::fclose(fp) != 0) {
        throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
    }
}

}  // namespace celltrack
