#include <doctest.h>

#include <cmath>

#include "celltrack/eval.hpp"
#include "celltrack/rng.hpp"

using namespace celltrack;

namespace {

// A track following x(t) = base + t along a line, one sample per frame.
Trajectory line_track(std::int64_t id, int first_frame, int n, double base_x, double y) {
    Trajectory t;
    t.cell_id = id;
    for (int k = 0; k < n; ++k) {
        t.samples.push_back({first_frame + k, {base_x + k, y, 5.0}, 1.0});
    }
    return t;
}

}  // namespace

TEST_CASE("match_frame basics") {
    const std::vector<Vec3> gt{{5, 5, 5}};

    SUBCASE("identical points match perfectly") {
        const AssociationResult r = match_frame(gt, gt, 3.0);
        REQUIRE(r.matches.size() == 1);
        CHECK(r.matches[0] == std::pair<int, int>{0, 0});
    }
    SUBCASE("a detection at 2x radius stays unmatched") {
        const std::vector<Vec3> det{{11, 5, 5}};
        const AssociationResult r = match_frame(det, gt, 3.0);
        CHECK(r.matches.empty());
    }
    SUBCASE("the nearer of two contenders wins") {
        const std::vector<Vec3> det{{5.5, 5, 5}, {6.5, 5, 5}};
        const AssociationResult fast = match_frame(det, gt, 3.0);
        const AssociationResult slow = brute_force_oracle(build_hypotheses(det, gt, 3.0));
        REQUIRE(fast.matches.size() == 1);
        CHECK(fast.matches[0].first == 0);
        CHECK(fast.objective == doctest::Approx(slow.objective));
    }
}

TEST_CASE("tracking accuracy fixtures") {
    EvalConfig cfg;
    const std::vector<Trajectory> gt{line_track(0, 0, 5, 10, 10)};

    SUBCASE("perfect prediction") {
        CHECK(tracking_accuracy(gt, gt, cfg) == doctest::Approx(1.0));
        CHECK(target_effectiveness(gt, gt, cfg) == doctest::Approx(1.0));
    }
    SUBCASE("one identity switch over 5 frames gives 0.75") {
        std::vector<Trajectory> pred;
        pred.push_back(line_track(0, 0, 3, 10, 10));       // frames 0..2
        pred.push_back(line_track(1, 3, 2, 10 + 3, 10));   // frames 3..4
        CHECK(tracking_accuracy(pred, gt, cfg) == doctest::Approx(0.75));
    }
    SUBCASE("empty prediction scores zero") {
        CHECK(tracking_accuracy({}, gt, cfg) == 0.0);
        CHECK(target_effectiveness({}, gt, cfg) == 0.0);
    }
}

TEST_CASE("target effectiveness fixtures") {
    EvalConfig cfg;
    const std::vector<Trajectory> gt{line_track(0, 0, 10, 20, 12)};

    SUBCASE("dominant track covering 7 of 10 frames gives 0.7") {
        std::vector<Trajectory> pred;
        pred.push_back(line_track(5, 0, 7, 20, 12));      // frames 0..6 on the target
        pred.push_back(line_track(6, 7, 3, 20 + 7, 12));  // remainder under another id
        CHECK(target_effectiveness(pred, gt, cfg) == doctest::Approx(0.7));
    }
    SUBCASE("contiguous variant scores the longest run") {
        // track 7 covers frames 0-2 and 5-8 (coverage 7, longest run 4)
        Trajectory a;
        a.cell_id = 7;
        for (int k : {0, 1, 2, 5, 6, 7, 8}) {
            a.samples.push_back({k, {20.0 + k, 12.0, 5.0}, 1.0});
        }
        std::vector<Trajectory> pred{a};
        CHECK(target_effectiveness(pred, gt, cfg) == doctest::Approx(0.7));
        EvalConfig contiguous = cfg;
        contiguous.contiguous_te = true;
        CHECK(target_effectiveness(pred, gt, contiguous) == doctest::Approx(0.4));
    }
}

TEST_CASE("corrupting one link lowers TA by exactly 1/total_links") {
    EvalConfig cfg;
    // 3 well-separated targets, 6 frames each: 15 links
    std::vector<Trajectory> gt;
    gt.push_back(line_track(0, 0, 6, 10, 10));
    gt.push_back(line_track(1, 0, 6, 10, 40));
    gt.push_back(line_track(2, 0, 6, 10, 70));
    CHECK(tracking_accuracy(gt, gt, cfg) == doctest::Approx(1.0));

    // switch identity of target 1 after frame 2
    std::vector<Trajectory> pred;
    pred.push_back(line_track(0, 0, 6, 10, 10));
    pred.push_back(line_track(1, 0, 3, 10, 40));
    pred.push_back(line_track(3, 3, 3, 13, 40));
    pred.push_back(line_track(2, 0, 6, 10, 70));
    const double ta = tracking_accuracy(pred, gt, cfg);
    CHECK(ta == doctest::Approx(1.0 - 1.0 / 15.0));
}

TEST_CASE("evaluate aggregates precision and recall") {
    EvalConfig cfg;
    std::vector<Trajectory> gt{line_track(0, 0, 4, 10, 10)};
    std::vector<Trajectory> pred{line_track(0, 0, 4, 10, 10),
                                 line_track(1, 0, 4, 10, 50)};  // one spurious track
    const EvalReport report = evaluate(pred, gt, cfg);
    CHECK(report.ta == doctest::Approx(1.0));
    CHECK(report.te == doctest::Approx(1.0));
    CHECK(report.mean_recall == doctest::Approx(1.0));
    CHECK(report.mean_precision == doctest::Approx(0.5));
    REQUIRE(report.frames.size() == 4);
    CHECK(report.frames[0].n_pred == 2);
    CHECK(report.frames[0].n_gt == 1);
}

TEST_CASE("TE always within [0,1] on random small cases") {
    CounterRng rng(555, 0);
    EvalConfig cfg;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Trajectory> gt, pred;
        const int n_targets = 1 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < n_targets; ++i) {
            gt.push_back(line_track(i, 0, 4 + static_cast<int>(rng.next_below(4)),
                                    rng.uniform(5, 60), 15.0 * i + 5));
        }
        const int n_pred = static_cast<int>(rng.next_below(4));
        for (int i = 0; i < n_pred; ++i) {
            pred.push_back(line_track(i, static_cast<int>(rng.next_below(3)),
                                      3 + static_cast<int>(rng.next_below(4)),
                                      rng.uniform(5, 60), 15.0 * (i % 3) + 5));
        }
        const double ta = tracking_accuracy(pred, gt, cfg);
        const double te = target_effectiveness(pred, gt, cfg);
        CHECK(ta >= 0.0);
        CHECK(ta <= 1.0);
        CHECK(te >= 0.0);
        CHECK(te <= 1.0);
    }
}
