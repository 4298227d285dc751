#include <doctest.h>

#include <cmath>

#include "celltrack/align.hpp"
#include "celltrack/rng.hpp"

using namespace celltrack;

namespace {

// Fields whose fractional parts stay at least `margin` away from the voxel
// lattice keep the interpolant smooth around the finite-difference probes.
DisplacementField random_safe_field(GridDims dims, CounterRng& rng, double margin = 0.05) {
    DisplacementField f(dims);
    for (int z = 0; z < dims.depth; ++z) {
        for (int y = 0; y < dims.height; ++y) {
            for (int x = 0; x < dims.width; ++x) {
                auto draw = [&]() {
                    const double mag = rng.uniform(margin, 0.45);
                    return rng.next_double() < 0.5 ? -mag : mag;
                };
                f.set(x, y, z, {draw(), draw(), draw()});
            }
        }
    }
    return f;
}

Volume3D random_volume(GridDims dims, CounterRng& rng) {
    Volume3D v(dims, 0.0f);
    for (auto& f : v.data()) f = static_cast<float>(rng.next_double());
    return v;
}

// Central finite differences of the total loss, component by component.
double fd_gradient(const Volume3D& fixed, const Volume3D& moving, DisplacementField field,
                   double gamma, int c, int x, int y, int z, double h = 1e-3) {
    auto& plane = c == 0 ? field.x() : (c == 1 ? field.y() : field.z());
    const std::size_t i = field.dims().index(x, y, z);
    const float orig = plane[i];
    plane[i] = static_cast<float>(orig + h);
    const double up = alignment_loss(fixed, moving, field, gamma).total;
    plane[i] = static_cast<float>(orig - h);
    const double down = alignment_loss(fixed, moving, field, gamma).total;
    plane[i] = orig;
    return (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("warp_image identity and pure shift") {
    HeatmapParams params;
    const Volume3D src = render_heatmap(std::vector<Vec3>{{4, 4, 4}}, {10, 10, 9}, params);
    const DisplacementField zero(src.dims());
    const Volume3D same = warp_image(src, zero);
    CHECK(same.data() == src.data());  // bitwise identity

    Volume3D impulse(10, 10, 9, 0.0f);
    impulse.at(4, 4, 4) = 1.0f;
    DisplacementField shift(impulse.dims());
    for (auto& v : shift.x()) v = 1.0f;
    const Volume3D moved = warp_image(impulse, shift);
    CHECK(moved.at(5, 4, 4) == doctest::Approx(1.0));
    CHECK(moved.at(4, 4, 4) == doctest::Approx(0.0));
}

TEST_CASE("warp_image agrees with scalar reference on a smooth field") {
    HeatmapParams params;
    const std::vector<Vec3> pts{{3.2, 4.1, 3.0}, {7.4, 6.2, 5.1}};
    const Volume3D src = render_heatmap(pts, {12, 12, 9}, params);
    DisplacementField f(src.dims());
    for (int z = 0; z < 9; ++z) {
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 12; ++x) {
                f.set(x, y, z, {0.2 + 0.01 * x, -0.1 + 0.01 * y, 0.05});
            }
        }
    }
    const Volume3D warped = warp_image(src, f);
    for (int z = 0; z < 9; ++z) {
        for (int y = 0; y < 12; ++y) {
            for (int x = 0; x < 12; ++x) {
                const Vec3 q = Vec3(x, y, z) - f.at(x, y, z);
                CHECK(warped.at(x, y, z) ==
                      doctest::Approx(sample_trilinear(src, q)).epsilon(1e-6));
            }
        }
    }
    // peaks survive a smooth warp nearly intact
    for (const auto& c : pts) {
        const Vec3 moved = warp_point(c, f);
        CHECK(sample_trilinear(warped, moved) > 0.9 * sample_trilinear(src, c));
    }
}

TEST_CASE("warp_point basics") {
    DisplacementField zero({8, 8, 8});
    const Vec3 c{3.5, 2.25, 4.0};
    CHECK(warp_point(c, zero) == c);

    DisplacementField constant({8, 8, 8});
    for (auto& v : constant.x()) v = 2.0f;
    for (auto& v : constant.y()) v = -1.0f;
    const Vec3 moved = warp_point(c, constant);
    CHECK(moved.x == doctest::Approx(5.5));
    CHECK(moved.y == doctest::Approx(1.25));
    CHECK(moved.z == doctest::Approx(4.0));

    CHECK_THROWS_AS(warp_point({-1, 0, 0}, zero), std::invalid_argument);
    CHECK_THROWS_AS(warp_point({0, 7.5, 8.2}, zero), std::invalid_argument);
}

TEST_CASE("warp_point constant-field consistency with warp_image peaks") {
    HeatmapParams params;
    const Vec3 c{5, 6, 4};
    const Volume3D hm = render_heatmap(std::vector<Vec3>{c}, {12, 14, 9}, params);
    DisplacementField f(hm.dims());
    for (auto& v : f.x()) v = 3.0f;
    for (auto& v : f.y()) v = 1.0f;
    const Volume3D warped = warp_image(hm, f);
    const Vec3 moved = warp_point(c, f);
    // the warped peak lands exactly at the warped point
    CHECK(warped.at(8, 7, 4) == doctest::Approx(1.0));
    CHECK(moved == Vec3{8, 7, 4});
}

TEST_CASE("warp_point interpolates a linear-in-x field by hand") {
    DisplacementField f({6, 6, 6});
    for (int z = 0; z < 6; ++z) {
        for (int y = 0; y < 6; ++y) {
            for (int x = 0; x < 6; ++x) f.set(x, y, z, {0.5 * x, 0, 0});
        }
    }
    // phi_x is linear in x, so at x=2.25 the interpolated value is 0.5*2.25
    const Vec3 moved = warp_point({2.25, 3, 3}, f);
    CHECK(moved.x == doctest::Approx(2.25 + 1.125));
}

TEST_CASE("loss examples") {
    HeatmapParams params;
    const Volume3D hm = render_heatmap(std::vector<Vec3>{{4, 4, 4}}, {8, 8, 8}, params);
    const DisplacementField zero(hm.dims());

    SUBCASE("identical volumes, zero field") {
        const LossTerms l = alignment_loss(hm, hm, zero, 0.01);
        CHECK(l.total == 0.0);
        CHECK(l.sim == 0.0);
        CHECK(l.smooth == 0.0);
    }
    SUBCASE("constant field has zero smoothness") {
        DisplacementField constant(hm.dims());
        for (auto& v : constant.x()) v = 2.5f;
        for (auto& v : constant.z()) v = -1.0f;
        const LossTerms l = alignment_loss(hm, hm, constant, 123.0);
        CHECK(l.smooth == 0.0);
    }
    SUBCASE("linear-in-x field smoothness is the forward-difference sum") {
        DisplacementField f(hm.dims());
        for (int z = 0; z < 8; ++z) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) f.set(x, y, z, {0.1 * x, 0, 0});
            }
        }
        const LossTerms l = alignment_loss(hm, hm, f, 1.0);
        // 7*8*8 voxels have a valid forward x-neighbor, each contributing 0.1^2
        CHECK(l.smooth == doctest::Approx(7 * 8 * 8 * 0.01).epsilon(1e-6));
        CHECK(l.total == doctest::Approx(l.sim + 1.0 * l.smooth / 512.0).epsilon(1e-12));
    }
}

TEST_CASE("loss_gradient: zero at the global minimum") {
    HeatmapParams params;
    const Volume3D hm = render_heatmap(std::vector<Vec3>{{3, 3, 2}}, {7, 7, 5}, params);
    const DisplacementField zero(hm.dims());
    FieldGradient g;
    alignment_loss_gradient(hm, hm, zero, 0.01, g);
    for (double v : g.x) CHECK(v == 0.0);
    for (double v : g.y) CHECK(v == 0.0);
    for (double v : g.z) CHECK(v == 0.0);
}

TEST_CASE("loss_gradient matches central finite differences") {
    CounterRng rng(2024, 0);
    const GridDims dims{6, 6, 4};
    for (double gamma : {0.0, 0.01, 1.0}) {
        const Volume3D fixed = random_volume(dims, rng);
        const Volume3D moving = random_volume(dims, rng);
        const DisplacementField field = random_safe_field(dims, rng);
        FieldGradient g;
        alignment_loss_gradient(fixed, moving, field, gamma, g);

        double max_rel = 0.0;
        for (int k = 0; k < 50; ++k) {
            const int x = static_cast<int>(rng.next_below(6));
            const int y = static_cast<int>(rng.next_below(6));
            const int z = static_cast<int>(rng.next_below(4));
            const int c = static_cast<int>(rng.next_below(3));
            const double fd = fd_gradient(fixed, moving, field, gamma, c, x, y, z);
            const double an = (c == 0 ? g.x : (c == 1 ? g.y : g.z))[dims.index(x, y, z)];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            max_rel = std::max(max_rel, std::abs(fd - an) / denom);
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("loss_gradient smoothness-only stencil on a hand-built field") {
    // zero images silence the similarity term entirely
    const GridDims dims{4, 4, 4};
    const Volume3D zeros(dims, 0.0f);
    DisplacementField f(dims);
    // a single bump in phi_x at (1,2,1)
    f.set(1, 2, 1, {2.0, 0, 0});
    const double gamma = 0.5;
    FieldGradient g;
    alignment_loss_gradient(zeros, zeros, f, gamma, g);

    // By hand: S = sum of squared forward differences of phi_x. The bump of
    // height b at p contributes (b)^2 for each of the 3 forward diffs out of p
    // and (b)^2 for each of the 3 forward diffs into p.
    // dS/dphi_x(p) = 2*[ sum_a (phi(p)-phi(p-e_a)) - sum_a (phi(p+e_a)-phi(p)) ]
    //             = 2*[3*b - (-3b)] = 12b at the bump; total grad scales by gamma/64.
    const double scale = gamma / 64.0;
    CHECK(g.x[dims.index(1, 2, 1)] == doctest::Approx(scale * 12.0 * 2.0));
    // each neighbor sees dS/dphi_x = 2*(0 - b) or 2*(b) depending on side -> magnitude 2b
    CHECK(g.x[dims.index(0, 2, 1)] == doctest::Approx(-scale * 2.0 * 2.0));
    CHECK(g.x[dims.index(2, 2, 1)] == doctest::Approx(-scale * 2.0 * 2.0));
    CHECK(g.x[dims.index(1, 1, 1)] == doctest::Approx(-scale * 2.0 * 2.0));
    CHECK(g.x[dims.index(1, 3, 1)] == doctest::Approx(-scale * 2.0 * 2.0));
    CHECK(g.x[dims.index(1, 2, 0)] == doctest::Approx(-scale * 2.0 * 2.0));
    CHECK(g.x[dims.index(1, 2, 2)] == doctest::Approx(-scale * 2.0 * 2.0));
    // far voxels untouched
    CHECK(g.x[dims.index(3, 0, 3)] == 0.0);
    for (double v : g.y) CHECK(v == 0.0);
}

TEST_CASE("fine_tune: identical inputs terminate near zero") {
    HeatmapParams params;
    const Volume3D hm = render_heatmap(std::vector<Vec3>{{6, 8, 4}, {14, 6, 5}}, {20, 16, 10}, params);
    AlignConfig cfg;
    cfg.max_iters = 50;
    const AlignResult r = fine_tune(hm, hm, cfg);
    CHECK(r.log.front().total == 0.0);
    CHECK(r.log.back().total <= r.log.front().total);
    double max_phi = 0.0;
    for (float v : r.field.x()) max_phi = std::max(max_phi, std::abs(double(v)));
    CHECK(max_phi < 1e-6);
}

TEST_CASE("fine_tune recovers a known constant shift") {
    HeatmapParams params;
    params.sigma = {3, 3, 2};
    std::vector<Vec3> pts{{10, 10, 6}, {20, 26, 8}, {14, 38, 7}, {24, 16, 5}, {12, 30, 9}};
    const Vec3 shift{3, 1, 0};
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(p + shift);

    const GridDims dims{36, 48, 14};
    const Volume3D moving = render_heatmap(pts, dims, params);
    const Volume3D fixed = render_heatmap(moved, dims, params);

    AlignConfig cfg;
    cfg.max_iters = 1500;
    cfg.update_tol = 1e-4;
    const AlignResult r = fine_tune(fixed, moving, cfg);

    double err = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        err += distance(warp_point(pts[i], r.field), moved[i]);
    }
    err /= static_cast<double>(pts.size());
    CHECK(err < 0.5);

    // monotone log within tolerance
    for (std::size_t k = 1; k < r.log.size(); ++k) {
        CHECK(r.log[k].total <= r.log[k - 1].total + 1e-6);
    }
    // never worse than the initialization
    CHECK(r.log.back().total <= r.log.front().total);
}

TEST_CASE("fine_tune rejects mismatched dims and bad config") {
    const Volume3D a(4, 4, 4, 0.0f), b(4, 4, 5, 0.0f);
    AlignConfig cfg;
    CHECK_THROWS_AS(fine_tune(a, b, cfg), std::invalid_argument);
    AlignConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(fine_tune(a, a, bad), std::invalid_argument);
}
