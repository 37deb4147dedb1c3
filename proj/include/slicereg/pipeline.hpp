#pragma once

#include <string>
#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/bspline.hpp"
#include "slicereg/config.hpp"
#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"
#include "slicereg/matching.hpp"
#include "slicereg/metrics.hpp"

namespace slicereg {

enum class PairStatus { ok, affine_only, unregistrable };
const char* to_string(PairStatus s);

/// Outcome of registering one (fixed, moving) section pair. The affine maps
/// moving coordinates onto the fixed frame; the displacement field lives on
/// the fixed grid and refines the affine when status is `ok`.
struct PairResult {
    PairStatus status = PairStatus::unregistrable;
    int fixed_index = 0;
    int moving_index = 1;
    double rotation_deg = 0.0;
    AffineTransform2D affine;
    int inlier_count = 0;
    uint64_t seed = 1;
    bool has_field = false;
    BSplineField field;
    std::vector<TracePoint> trace;
    MatchSet matches;              // winning matches, moving side unrotated
    double initial_ncc = 0.0;      // mean windowed correlation after the affine alone
    double final_ncc = 0.0;        // same, after refinement (equal when affine_only)
    bool has_prewarped = false;
    ScalarImage prewarped;         // affine-resampled moving, kept on request
    std::string failure;           // reason when unregistrable
};

/// fixed -> moving coordinates: x -> A^-1(x + d(x)). Sampling the moving image
/// at these points renders it on the fixed frame in one resampling.
MapPtr pair_forward_map(const PairResult& r);
/// moving -> fixed coordinates, the exact inverse of the forward map (the
/// field part inverted by fixed-point iteration).
MapPtr pair_inverse_map(const PairResult& r);

/// Full pair pipeline: rotation sweep (or imported matches), RANSAC affine,
/// affine prewarp, B-spline refinement. Degrades to affine_only when the
/// refinement does not improve the similarity term or fails to evaluate;
/// reports unregistrable instead of throwing when no model can be found.
PairResult register_pair(const ScalarImage& fixed, const ScalarImage& moving, const Config& cfg,
                         const MatchSet* imported = nullptr);

struct SequenceResult {
    int reference_index = 0;
    std::vector<PairResult> pairs;  // pair i aligns fixed=slice i, moving=slice i+1
    std::vector<MapPtr> to_slice;   // reference-frame -> slice coords; null if unreachable
    std::vector<bool> chained;
    bool complete() const;          // every slice reachable from the reference
};

/// Register every adjacent pair and chain the maps outward from the reference
/// section (first or middle per cfg). Slices beyond an unregistrable pair stay
/// unchained. With cfg.matches_dir set, per-pair match files replace keypoint
/// detection.
SequenceResult register_sequence(const std::vector<ScalarImage>& slices, const Config& cfg);

/// Slice `index` rendered on the reference canvas: one resampling through the
/// chained map, or the legacy per-hop two-pass schedule when configured.
/// Throws for slices the chain could not place.
ScalarImage render_slice(const std::vector<ScalarImage>& slices, const SequenceResult& seq,
                         int index, const Config& cfg);

/// Write the full artifact set into out_dir: slice_*.png, volume.raw +
/// volume.txt, per-pair transform/field/trace/match files, manifest.json.
void export_volume(const std::vector<ScalarImage>& slices, const SequenceResult& seq,
                   const Config& cfg, const std::string& out_dir);

// --- stored pair transforms --------------------------------------------------

struct PairTransform {
    AffineTransform2D affine;  // moving -> fixed
    double rotation_deg = 0.0;
    int inlier_count = 0;
    uint64_t seed = 1;
};

std::string transform_to_json(const PairTransform& t);
PairTransform transform_from_json(const std::string& text);
void write_transform(const PairTransform& t, const std::string& path);
PairTransform read_transform(const std::string& path);

/// fixed -> moving map from stored artifacts; field may be null (affine only).
MapPtr stored_pair_map(const PairTransform& t, const BSplineField* field);

// --- run evaluation -----------------------------------------------------------

/// Landmark evaluation of a finished run: reads manifest.json in run_dir,
/// loads each registered pair's stored map, compares against slice_NNN.csv
/// landmark files in landmarks_dir, and writes metrics.json and
/// pair_metrics.csv back into run_dir. pixel_size_um <= 0 takes the value from
/// the run's config echo.
MetricsSummary evaluate_run(const std::string& run_dir, const std::string& landmarks_dir,
                            double pixel_size_um = 0.0);

std::string pair_stem(int fixed_index, int moving_index);  // "pair_000_001"
std::string slice_stem(int index);                         // "slice_000"

}  // namespace slicereg
