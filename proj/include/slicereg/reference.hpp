#pragma once

#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/bspline.hpp"
#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"

namespace slicereg {

/// Plain serial counterparts of the parallel kernels. They follow the same
/// definitions with straightforward loops (no summed-area tables, no strip
/// reductions, no OpenMP) and exist to pin down the optimized versions in
/// tests and in the kernel benchmark.

ScalarImage warp_reference(const ScalarImage& moving, const CoordinateMap& map, int out_width,
                           int out_height, double fill = 0.0);

double ncc_loss_reference(const ScalarImage& fixed, const ScalarImage& moving,
                          const BSplineField& field, const OptimizerConfig& cfg);
double ncc_loss_reference(const ScalarImage& fixed, const ScalarImage& moving,
                          const AffineTransform2D& fixed_to_moving, const BSplineField& field,
                          const OptimizerConfig& cfg);

double reg_loss_reference(const BSplineField& field, int width, int height);

LossBreakdown loss_and_gradient_reference(const ScalarImage& fixed, const ScalarImage& moving,
                                          const BSplineField& field, const OptimizerConfig& cfg,
                                          std::vector<double>* gradient);
LossBreakdown loss_and_gradient_reference(const ScalarImage& fixed, const ScalarImage& moving,
                                          const AffineTransform2D& fixed_to_moving,
                                          const BSplineField& field, const OptimizerConfig& cfg,
                                          std::vector<double>* gradient);

RansacResult ransac_affine_reference(const MatchSet& matches, const RansacConfig& cfg);

}  // namespace slicereg
