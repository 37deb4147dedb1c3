#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "slicereg/bspline.hpp"
#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"
#include "slicereg/reference.hpp"
#include "slicereg/rng.hpp"

using namespace slicereg;

namespace {

ScalarImage texture(int w, int h, uint64_t seed) {
    Rng rng(seed);
    const int cell = 6;
    ScalarImage coarse(w / cell + 2, h / cell + 2);
    for (double& v : coarse.pixels) v = rng.uniform();
    ScalarImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = sample_bilinear(coarse, static_cast<double>(x) / cell,
                                           static_cast<double>(y) / cell, 0.5);
    return img;
}

BSplineField random_field(int w, int h, double spacing, double amp, uint64_t seed) {
    BSplineField f = make_field_covering(w, h, spacing);
    Rng rng(seed);
    for (double& c : f.coeffs) c = rng.uniform(-amp, amp);
    return f;
}

double rel_diff(double a, double b) {
    const double scale = std::max({1e-30, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) / scale;
}

}  // namespace

TEST_CASE("warp agrees with the serial reference bit for bit") {
    const ScalarImage src = texture(72, 88, 3);
    const AffineTransform2D aff =
        AffineTransform2D::rotation_about(17.0, {35.5, 43.5}, {33.0, 46.0});
    const BSplineField field = random_field(80, 64, 20.0, 4.0, 5);

    const std::vector<MapPtr> maps = {
        make_identity_map(),
        make_affine_map(aff),
        make_bspline_map(field),
        make_composed_map({make_bspline_map(field), make_affine_map(aff)}),
    };
    for (const MapPtr& m : maps) {
        const ScalarImage a = warp(src, *m, 80, 64, 0.3);
        const ScalarImage b = warp_reference(src, *m, 80, 64, 0.3);
        REQUIRE(a.width == b.width);
        REQUIRE(a.height == b.height);
        CHECK(a.pixels == b.pixels);
    }
}

TEST_CASE("similarity term matches the naive window loop") {
    const ScalarImage fixed = texture(64, 64, 7);
    const ScalarImage moving = texture(64, 64, 9);
    OptimizerConfig cfg;
    for (uint64_t seed : {11, 12, 13}) {
        const BSplineField f = random_field(64, 64, 16.0, 1.5, seed);
        CHECK(rel_diff(ncc_loss(fixed, moving, f, cfg),
                       ncc_loss_reference(fixed, moving, f, cfg)) < 1e-11);
    }
    SUBCASE("with a composed affine") {
        const AffineTransform2D aff =
            AffineTransform2D::rotation_about(-8.0, {31.5, 31.5}, {32.5, 30.0});
        const BSplineField f = random_field(64, 64, 16.0, 1.5, 17);
        CHECK(rel_diff(evaluate_loss(fixed, moving, aff, f, cfg).ncc_term,
                       ncc_loss_reference(fixed, moving, aff, f, cfg)) < 1e-11);
    }
    SUBCASE("odd window and stride settings") {
        OptimizerConfig odd;
        odd.ncc_window_radius = 4;
        odd.sample_stride = 3;
        const BSplineField f = random_field(64, 64, 16.0, 1.5, 19);
        CHECK(rel_diff(ncc_loss(fixed, moving, f, odd),
                       ncc_loss_reference(fixed, moving, f, odd)) < 1e-11);
    }
}

TEST_CASE("smoothness term matches the naive difference loop") {
    for (uint64_t seed : {21, 22}) {
        const BSplineField f = random_field(70, 54, 14.0, 3.0, seed);
        CHECK(rel_diff(reg_loss(f, 70, 54), reg_loss_reference(f, 70, 54)) < 1e-11);
    }
}

TEST_CASE("gradients match the per-window reference accumulation") {
    const ScalarImage fixed = texture(64, 64, 31);
    const ScalarImage moving = texture(64, 64, 33);
    OptimizerConfig cfg;
    cfg.lambda = 0.7;

    SUBCASE("identity overload") {
        const BSplineField f = random_field(64, 64, 16.0, 1.0, 35);
        std::vector<double> g_fast, g_ref;
        const LossBreakdown a = loss_and_gradient(fixed, moving, f, cfg, &g_fast);
        const LossBreakdown b = loss_and_gradient_reference(fixed, moving, f, cfg, &g_ref);
        CHECK(rel_diff(a.total, b.total) < 1e-11);
        CHECK(rel_diff(a.ncc_term, b.ncc_term) < 1e-11);
        CHECK(rel_diff(a.reg_term, b.reg_term) < 1e-11);
        CHECK(a.valid_pixel_count == b.valid_pixel_count);
        REQUIRE(g_fast.size() == g_ref.size());
        double gmax = 1e-30;
        for (double g : g_ref) gmax = std::max(gmax, std::fabs(g));
        for (size_t i = 0; i < g_fast.size(); ++i)
            CHECK(std::fabs(g_fast[i] - g_ref[i]) / gmax < 1e-10);
    }
    SUBCASE("composed-affine overload") {
        const AffineTransform2D aff =
            AffineTransform2D::rotation_about(5.0, {31.5, 31.5}, {30.0, 33.5});
        const BSplineField f = random_field(64, 64, 16.0, 1.0, 37);
        std::vector<double> g_fast, g_ref;
        const LossBreakdown a = loss_and_gradient(fixed, moving, aff, f, cfg, &g_fast);
        const LossBreakdown b = loss_and_gradient_reference(fixed, moving, aff, f, cfg, &g_ref);
        CHECK(rel_diff(a.total, b.total) < 1e-11);
        REQUIRE(g_fast.size() == g_ref.size());
        double gmax = 1e-30;
        for (double g : g_ref) gmax = std::max(gmax, std::fabs(g));
        for (size_t i = 0; i < g_fast.size(); ++i)
            CHECK(std::fabs(g_fast[i] - g_ref[i]) / gmax < 1e-10);
    }
}

TEST_CASE("model fitting matches the serial reference exactly") {
    Rng rng(41);
    const AffineTransform2D truth{1.05, -0.12, 0.08, 0.97, 14.0, -6.0};
    MatchSet ms;
    ms.fixed_width = ms.moving_width = 512;
    ms.fixed_height = ms.moving_height = 512;
    for (int i = 0; i < 24; ++i) {
        const Vec2 q{rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0)};
        ms.pairs.push_back({apply(truth, q), q, 1.0});
    }
    for (int i = 0; i < 12; ++i) {
        ms.pairs.push_back({{rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0)},
                            {rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0)},
                            0.5});
    }
    RansacConfig rc;
    const RansacResult a = ransac_affine(ms, rc);
    const RansacResult b = ransac_affine_reference(ms, rc);
    CHECK(a.transform.a11 == b.transform.a11);
    CHECK(a.transform.a12 == b.transform.a12);
    CHECK(a.transform.a21 == b.transform.a21);
    CHECK(a.transform.a22 == b.transform.a22);
    CHECK(a.transform.tx == b.transform.tx);
    CHECK(a.transform.ty == b.transform.ty);
    CHECK(a.inlier_indices == b.inlier_indices);
    CHECK(a.inlier_count == b.inlier_count);
    CHECK(a.mean_residual == b.mean_residual);
}
