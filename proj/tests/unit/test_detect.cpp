#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "celltrack/detect.hpp"
#include "celltrack/rng.hpp"

using namespace celltrack;

namespace {

Volume3D render_blobs(const std::vector<Vec3>& pts, const std::vector<double>& amps, GridDims dims,
                      Vec3 sigma) {
    HeatmapParams params;
    params.sigma = sigma;
    return render_heatmap(pts, amps, dims, params);
}

}  // namespace

TEST_CASE("estimate_heatmap on an all-zero image is all zero") {
    DetectConfig cfg;
    const Volume3D zeros(20, 20, 10, 0.0f);
    const Volume3D hm = estimate_heatmap(zeros, cfg);
    for (float f : hm.data()) CHECK(f == 0.0f);
}

TEST_CASE("estimate_heatmap finds a matching blob with response near 1") {
    DetectConfig cfg;  // sigma (2,2,1)
    const Vec3 c{12, 14, 6};
    const Volume3D img = render_blobs({c}, {0.7}, {25, 29, 13}, cfg.sigma);
    const Volume3D hm = estimate_heatmap(img, cfg);

    float best = 0.0f;
    Vec3 argbest;
    for (int z = 0; z < 13; ++z) {
        for (int y = 0; y < 29; ++y) {
            for (int x = 0; x < 25; ++x) {
                if (hm.at(x, y, z) > best) {
                    best = hm.at(x, y, z);
                    argbest = {double(x), double(y), double(z)};
                }
            }
        }
    }
    CHECK(best > 0.9);
    CHECK(distance(argbest, c) <= 1.0);
}

TEST_CASE("estimate_heatmap response is contrast-invariant without noise") {
    DetectConfig cfg;
    const Vec3 a{10, 10, 6}, b{10, 34, 6};
    const Volume3D img = render_blobs({a, b}, {1.0, 0.1}, {21, 45, 13}, cfg.sigma);
    const Volume3D hm = estimate_heatmap(img, cfg);
    CHECK(sample_trilinear(hm, a) > 0.5);
    CHECK(sample_trilinear(hm, b) > 0.5);
}

TEST_CASE("regenerate_prior examples") {
    const GridDims dims{16, 16, 8};
    HeatmapParams params;
    DisplacementField zero(dims);

    SUBCASE("empty set renders all zero") {
        DetectionSet none;
        const Volume3D prior = regenerate_prior(none, zero, dims, params);
        for (float f : prior.data()) CHECK(f == 0.0f);
    }
    SUBCASE("zero field reproduces the plain rendering") {
        DetectionSet one;
        one.points = {{6, 7, 4}};
        one.confidence = {1.0};
        const Volume3D prior = regenerate_prior(one, zero, dims, params);
        const Volume3D direct = render_heatmap(one.points, dims, params);
        CHECK(prior.data() == direct.data());
    }
    SUBCASE("constant field shifts the peak exactly") {
        DetectionSet one;
        one.points = {{6, 7, 4}};
        one.confidence = {1.0};
        DisplacementField f(dims);
        for (auto& v : f.x()) v = 2.0f;
        const Volume3D prior = regenerate_prior(one, f, dims, params);
        CHECK(prior.at(8, 7, 4) == doctest::Approx(1.0));
    }
    SUBCASE("points warped out of bounds are dropped") {
        DetectionSet one;
        one.points = {{14, 7, 4}};
        one.confidence = {0.9};
        DisplacementField f(dims);
        for (auto& v : f.x()) v = 5.0f;  // 14+5 = 19, beyond width 16
        const Volume3D prior = regenerate_prior(one, f, dims, params);
        for (float v : prior.data()) CHECK(v == 0.0f);
    }
    SUBCASE("prior peaks carry the detection confidence") {
        DetectionSet one;
        one.points = {{6, 7, 4}};
        one.confidence = {0.8};
        const Volume3D prior = regenerate_prior(one, zero, dims, params);
        CHECK(prior.at(6, 7, 4) == doctest::Approx(0.8));
    }
}

TEST_CASE("fuse_pairwise endpoints and the recovery example") {
    const GridDims dims{4, 4, 2};
    Volume3D image(dims, 0.04f);
    Volume3D prior(dims, 0.8f);

    const Volume3D w0 = fuse_pairwise(image, prior, 0.0);
    CHECK(w0.data() == image.data());
    const Volume3D w1 = fuse_pairwise(image, prior, 1.0);
    CHECK(w1.data() == prior.data());

    // sub-threshold image evidence (0.04) + confident prior (0.8) at w=0.3
    const Volume3D fused = fuse_pairwise(image, prior, 0.3);
    CHECK(fused.at(0, 0, 0) == doctest::Approx(0.268));
    CHECK(fused.at(0, 0, 0) > 0.05);

    Volume3D wrong(4, 4, 3, 0.0f);
    CHECK_THROWS_AS(fuse_pairwise(image, wrong, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(fuse_pairwise(image, prior, 1.5), std::invalid_argument);
}

TEST_CASE("fuse_pairwise is monotone and bounded by the pointwise max") {
    CounterRng rng(5, 0);
    const GridDims dims{6, 5, 4};
    Volume3D a(dims, 0.0f), b(dims, 0.0f), a2(dims, 0.0f);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        a.data()[i] = static_cast<float>(rng.next_double());
        b.data()[i] = static_cast<float>(rng.next_double());
        a2.data()[i] = std::min(1.0f, a.data()[i] + 0.1f);
    }
    const Volume3D f1 = fuse_pairwise(a, b, 0.3);
    const Volume3D f2 = fuse_pairwise(a2, b, 0.3);
    for (std::size_t i = 0; i < f1.data().size(); ++i) {
        CHECK(f2.data()[i] >= f1.data()[i]);  // monotone in the image input
        CHECK(f1.data()[i] <= std::max(a.data()[i], b.data()[i]) + 1e-7f);
        CHECK(f1.data()[i] >= 0.0f);
        CHECK(f1.data()[i] <= 1.0f);
    }
}

TEST_CASE("detect_peaks recovers well-separated rendered points") {
    DetectConfig cfg;  // threshold 0.05, nms 3
    const std::vector<Vec3> pts{{6, 6, 4}, {20, 10, 8}, {10, 24, 5}};
    HeatmapParams params;
    const Volume3D hm = render_heatmap(pts, {28, 30, 12}, params);
    const DetectionSet dets = detect_peaks(hm, cfg, 3);
    REQUIRE(dets.size() == 3);
    CHECK(dets.frame == 3);
    for (const auto& p : pts) {
        double best = 1e9;
        for (const auto& q : dets.points) best = std::min(best, distance(p, q));
        CHECK(best < 0.25);
    }
    for (double c : dets.confidence) CHECK(c > cfg.peak_threshold);
}

TEST_CASE("detect_peaks on an all-zero heatmap is empty") {
    DetectConfig cfg;
    const Volume3D zeros(10, 10, 5, 0.0f);
    CHECK(detect_peaks(zeros, cfg).empty());
}

TEST_CASE("detect_peaks NMS keeps only the stronger of two close peaks") {
    DetectConfig cfg;
    cfg.nms_radius = 3.0;
    cfg.subvoxel_refine = false;

    SUBCASE("1 voxel apart") {
        Volume3D hm(12, 12, 6, 0.0f);
        hm.at(5, 5, 3) = 0.9f;
        hm.at(6, 5, 3) = 0.8f;
        const DetectionSet dets = detect_peaks(hm, cfg);
        REQUIRE(dets.size() == 1);
        CHECK(dets.points[0] == Vec3{5, 5, 3});
        CHECK(dets.confidence[0] == doctest::Approx(0.9));
    }
    SUBCASE("2 voxels apart, both strict maxima") {
        Volume3D hm(12, 12, 6, 0.0f);
        hm.at(5, 5, 3) = 0.9f;
        hm.at(7, 5, 3) = 0.8f;
        const DetectionSet dets = detect_peaks(hm, cfg);
        REQUIRE(dets.size() == 1);
        CHECK(dets.points[0] == Vec3{5, 5, 3});
    }
    SUBCASE("beyond the radius both survive") {
        Volume3D hm(12, 12, 6, 0.0f);
        hm.at(5, 5, 3) = 0.9f;
        hm.at(9, 5, 3) = 0.8f;
        CHECK(detect_peaks(hm, cfg).size() == 2);
    }
}

TEST_CASE("detect_peaks commutes with axis permutation") {
    DetectConfig cfg;
    cfg.sigma = {2, 2, 2};        // isotropic so a permutation is a pure relabeling
    cfg.nms_radius = 3.0;
    CounterRng rng(11, 0);
    const GridDims dims{14, 14, 14};
    HeatmapParams params;
    params.sigma = {2, 2, 2};
    std::vector<Vec3> pts;
    for (int i = 0; i < 4; ++i) {
        pts.push_back({rng.uniform(3, 11), rng.uniform(3, 11), rng.uniform(3, 11)});
    }
    const Volume3D hm = render_heatmap(pts, dims, params);

    // permute (x,y,z) -> (y,z,x)
    Volume3D perm(dims, 0.0f);
    for (int z = 0; z < 14; ++z) {
        for (int y = 0; y < 14; ++y) {
            for (int x = 0; x < 14; ++x) perm.at(y, z, x) = hm.at(x, y, z);
        }
    }
    DetectionSet a = detect_peaks(hm, cfg);
    DetectionSet b = detect_peaks(perm, cfg);
    REQUIRE(a.size() == b.size());
    auto key = [](const Vec3& v) { return std::tuple(v.x, v.y, v.z); };
    std::vector<Vec3> a_mapped;
    for (const auto& p : a.points) a_mapped.push_back({p.y, p.z, p.x});
    std::sort(a_mapped.begin(), a_mapped.end(), [&](auto& u, auto& v) { return key(u) < key(v); });
    std::sort(b.points.begin(), b.points.end(), [&](auto& u, auto& v) { return key(u) < key(v); });
    for (std::size_t i = 0; i < a_mapped.size(); ++i) {
        CHECK(distance(a_mapped[i], b.points[i]) < 1e-9);
    }
}

TEST_CASE("pairwise consistency: adequate image evidence is always re-detected") {
    // for any fused value (1-w)*image + w*prior, image >= (thr - w*prior)/(1-w)
    // guarantees re-detection; construct the boundary case explicitly
    DetectConfig cfg;
    const double w = cfg.prior_weight;  // 0.3
    const double prior_conf = 0.1;      // weak prior so the boundary image value is positive
    const double image_value = (cfg.peak_threshold - w * prior_conf + 0.002) / (1.0 - w);

    const GridDims dims{20, 20, 10};
    HeatmapParams params;
    const Vec3 c{10, 10, 5};
    const Volume3D image_hm = render_blobs({c}, {image_value}, dims, params.sigma);
    const Volume3D prior_hm = render_blobs({c}, {prior_conf}, dims, params.sigma);
    const Volume3D fused = fuse_pairwise(image_hm, prior_hm, w);
    const DetectionSet dets = detect_peaks(fused, cfg);
    REQUIRE(dets.size() == 1);
    CHECK(distance(dets.points[0], c) < 0.5);

    // and without the prior the same evidence stays sub-threshold
    CHECK(detect_peaks(image_hm, cfg).empty());
}
