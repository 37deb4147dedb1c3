#pragma once

#include <cstdint>
#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/bspline.hpp"
#include "slicereg/image.hpp"
#include "slicereg/metrics.hpp"

namespace slicereg {

/// Parameters for a synthetic serial-section sequence with known ground truth.
struct SynthConfig {
    int width = 256;
    int height = 256;
    int count = 10;
    uint64_t seed = 1;
    int landmark_grid = 5;            // landmarks form a grid x grid interior lattice
    double texture_scale_px = 16.0;   // blob size of the base texture
    double max_rotation_deg = 8.0;    // per-slice pose, about the image center
    double max_translation_px = 6.0;
    double max_log_scale = 0.0;       // isotropic scale jitter, exp(+-value)
    double deform_amplitude_px = 3.0; // smooth non-rigid component
    double deform_spacing_px = 48.0;  // must be >= 2 * amplitude
    double noise_sigma = 0.01;        // additive Gaussian, result clipped to [0,1]
    double drift_gain = 0.0;          // structural drift along the stack, 0 = none
    // optional quality degradations, applied to the pixels only
    int tears = 0;                // dark polyline artifacts
    int folds = 0;                // bands of locally doubled contrast
    double illumination_gain = 0.0;  // x ramp spanning [1-g, 1+g]
};

/// One generated section. `affine` and `deform` define the slice-to-reference
/// geometry: a point x in this slice sits at affine(x + deform(x)) in the
/// reference frame (slice 0). Landmarks are the slice-frame positions of a
/// reference point set shared by all slices, under the same ids.
struct SynthSlice {
    ScalarImage image;
    LandmarkSet landmarks;
    AffineTransform2D affine;
    BSplineField deform;
};

struct SynthSequence {
    std::vector<SynthSlice> slices;
    SynthConfig config;
};

/// Deterministic in cfg: slice content, geometry, landmarks and degradations
/// derive from per-purpose seed streams. Slice 0 is the undeformed reference.
SynthSequence generate_sequence(const SynthConfig& cfg);

/// The degradation pass alone (tears, folds, illumination ramp), driven by an
/// explicit stream so tests can target it.
ScalarImage apply_degradations(const ScalarImage& img, const SynthConfig& cfg, uint64_t stream);

}  // namespace slicereg
