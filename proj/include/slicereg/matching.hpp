#pragma once

#include <string>
#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/image.hpp"
#include "slicereg/matchset.hpp"

namespace slicereg {

struct DetectorConfig {
    int max_keypoints = 4096;  // strongest responses kept, across all levels
    double harris_k = 0.04;
    int levels = 3;            // half-resolution pyramid
    int nms_radius = 4;        // per level
};

/// Harris corners over a half-resolution pyramid, with a 16x16 mean-subtracted,
/// unit-normalized patch descriptor sampled at the detection level. Coordinates
/// are reported at the original resolution. Throws for images smaller than
/// 32x32 and for content yielding fewer than 4 keypoints.
std::vector<Keypoint> detect_keypoints(const ScalarImage& img, const DetectorConfig& cfg = {});

struct MatcherConfig {
    double ratio = 0.9;  // Lowe ratio on descriptor distance d = 1 - similarity
};

/// Mutual nearest neighbors under dot-product similarity, filtered by the
/// ratio test applied from both sides (so swapping the inputs mirrors the
/// pairs). Pair order follows the fixed keypoint order.
MatchSet match_descriptors(const std::vector<Keypoint>& fixed_kps,
                           const std::vector<Keypoint>& moving_kps,
                           const MatcherConfig& cfg = {});

/// Write matches as CSV with a `# fixed_x,fixed_y,moving_x,moving_y,score`
/// header line.
void write_matches(const MatchSet& matches, const std::string& path);

/// Parse a match file. Errors carry the 1-based line number. When the fixed or
/// moving dimensions in `dims` are nonzero, points outside the corresponding
/// image rectangle are rejected. Exact coordinate duplicates keep the first
/// occurrence.
MatchSet import_matches(const std::string& path, const MatchSet& dims);

struct AngleScore {
    double angle_deg = 0.0;
    int inlier_count = 0;
};

struct RotationSweepResult {
    double best_angle = 0.0;       // detected rotation of the moving section
    MatchSet matches;              // winning matches, moving side in unrotated coords
    RansacResult ransac;           // winning model (moving -> fixed, unrotated coords)
    std::vector<AngleScore> scores;
};

/// Try each candidate rotation of the moving image: counter-rotate, re-detect,
/// match against the fixed keypoints, and score by RANSAC inlier count. Ties
/// prefer the smaller |angle|, then the positive one. Throws "pair
/// unregistrable" when no candidate reaches cfg.min_inliers.
RotationSweepResult rotation_sweep(const ScalarImage& fixed, const ScalarImage& moving,
                                   const std::vector<double>& angles_deg,
                                   const DetectorConfig& det_cfg, const MatcherConfig& match_cfg,
                                   const RansacConfig& ransac_cfg);

}  // namespace slicereg
