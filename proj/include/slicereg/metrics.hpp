#pragma once

#include <string>
#include <vector>

#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"

namespace slicereg {

struct Landmark {
    int id = 0;
    Vec2 p;
};

struct LandmarkSet {
    std::vector<Landmark> points;
};

/// CSV `landmark_id,x,y`. Errors carry the 1-based line number; duplicate ids
/// are rejected.
LandmarkSet read_landmarks_csv(const std::string& path);
void write_landmarks_csv(const LandmarkSet& lms, const std::string& path);

/// Median with the even-count convention of averaging the two central values.
double median(std::vector<double> values);

struct PairEvaluation {
    int fixed_index = -1;
    int moving_index = -1;
    int landmark_count = 0;
    double median_rtre = 0.0;
    double mean_rtre = 0.0;
    double max_rtre = 0.0;
    double robustness = 0.0;   // fraction of landmarks strictly improved vs identity
    double mean_dist_px = 0.0;
};

/// Landmark errors for one registered pair. Fixed landmarks are pushed through
/// the fixed->moving map and compared against the moving landmarks with the
/// same id; errors are normalized by the image diagonal sqrt(w^2 + h^2).
/// Throws when the two sets share no ids.
PairEvaluation evaluate_pair(const LandmarkSet& fixed_lms, const LandmarkSet& moving_lms,
                             const CoordinateMap& fixed_to_moving, int width, int height);

struct MetricsSummary {
    double am_rtre = 0.0;     // mean of per-pair medians
    double mm_rtre = 0.0;     // median of per-pair medians
    double amean_rtre = 0.0;  // mean of per-pair means
    double amx_rtre = 0.0;    // mean of per-pair maxima
    double r_avg = 0.0;       // mean per-pair robustness
    double amean_d_px = 0.0;  // mean of per-pair mean distances, pixels
    double amean_d_um = 0.0;
    int pair_count = 0;
};

MetricsSummary aggregate(const std::vector<PairEvaluation>& pairs, double pixel_size_um);

std::string metrics_to_json(const std::vector<PairEvaluation>& pairs, const MetricsSummary& summary,
                            double pixel_size_um);
void write_metrics_json(const std::vector<PairEvaluation>& pairs, const MetricsSummary& summary,
                        double pixel_size_um, const std::string& path);

/// One row per pair:
/// `fixed_index,moving_index,landmark_count,median_rtre,mean_rtre,max_rtre,robustness,mean_dist_px`.
void write_pair_metrics_csv(const std::vector<PairEvaluation>& pairs, const std::string& path);

}  // namespace slicereg
