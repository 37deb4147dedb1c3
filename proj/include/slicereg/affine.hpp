#pragma once

#include <cstdint>
#include <vector>

#include "slicereg/image.hpp"
#include "slicereg/matchset.hpp"

namespace slicereg {

/// 2D affine transform: p' = A p + t with A = [[a11,a12],[a21,a22]].
struct AffineTransform2D {
    double a11 = 1.0, a12 = 0.0;
    double a21 = 0.0, a22 = 1.0;
    double tx = 0.0, ty = 0.0;

    static AffineTransform2D identity() { return {}; }
    static AffineTransform2D translation(double dx, double dy) {
        return {1.0, 0.0, 0.0, 1.0, dx, dy};
    }
    /// Rotation by `deg` degrees about pivot c, plus an output-frame offset.
    static AffineTransform2D rotation_about(double deg, Vec2 c, Vec2 c_out);

    double det() const { return a11 * a22 - a12 * a21; }
};

Vec2 apply(const AffineTransform2D& t, Vec2 p);

/// compose(t2, t1): apply t1 first, then t2.
AffineTransform2D compose(const AffineTransform2D& t2, const AffineTransform2D& t1);

/// Exact inverse; throws for |det| <= 1e-12.
AffineTransform2D invert(const AffineTransform2D& t);

/// Least-squares fit of the moving->fixed affine minimizing
/// sum ||A q_i + t - p_i||^2 over the matches (q = moving point, p = fixed).
/// Throws on < 3 pairs or a degenerate (collinear) moving configuration.
AffineTransform2D estimate_least_squares(const MatchSet& matches);

struct RansacConfig {
    int max_iterations = 2000;
    double inlier_threshold = 3.0;  // pixels
    int min_inliers = 8;
    uint64_t seed = 1;
};

struct RansacResult {
    AffineTransform2D transform;     // re-fit on the full inlier set
    std::vector<int> inlier_indices; // indices into the input match list
    int inlier_count = 0;
    double mean_residual = 0.0;      // over inliers, of the winning minimal model
};

/// RANSAC over 3-point affine models. Sampling uses a counter-based stream per
/// iteration index over a canonically sorted copy of the matches, so the result
/// depends only on (matches-as-a-set, cfg) and not on input order or on how the
/// iteration loop is scheduled. Throws "pair unregistrable" when the best model
/// has fewer than cfg.min_inliers inliers.
RansacResult ransac_affine(const MatchSet& matches, const RansacConfig& cfg);

/// Non-throwing variant for callers scoring several candidate match sets:
/// returns false when no model reaches cfg.min_inliers (including < 3
/// matches), with *out still describing the best model found, if any.
bool try_ransac_affine(const MatchSet& matches, const RansacConfig& cfg, RansacResult* out);

}  // namespace slicereg
