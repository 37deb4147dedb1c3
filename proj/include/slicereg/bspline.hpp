#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"

namespace slicereg {

/// Cubic B-spline displacement field on a uniform control grid. Control point
/// (i,j) sits at (origin_x + i*spacing_x, origin_y + j*spacing_y); coefficient
/// vectors are stored (dx,dy)-interleaved, row-major over (i,j).
struct BSplineField {
    int nx = 0;
    int ny = 0;
    double spacing_x = 0.0;
    double spacing_y = 0.0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    std::vector<double> coeffs;  // 2 * nx * ny

    double cx(int i, int j) const { return coeffs[2 * (static_cast<size_t>(j) * nx + i)]; }
    double cy(int i, int j) const { return coeffs[2 * (static_cast<size_t>(j) * nx + i) + 1]; }
    double& cx(int i, int j) { return coeffs[2 * (static_cast<size_t>(j) * nx + i)]; }
    double& cy(int i, int j) { return coeffs[2 * (static_cast<size_t>(j) * nx + i) + 1]; }
};

/// Zero field whose cubic support covers every pixel of a width x height
/// image, with one ring of control points beyond each edge.
BSplineField make_field_covering(int width, int height, double spacing);

/// Uniform cubic B-spline weights for the 4 control points spanning a cell,
/// as a function of the normalized in-cell offset u in [0,1).
std::array<double, 4> basis_cubic(double u);

/// T(x) = x + sum of coefficient vectors weighted by the tensor-product basis.
/// Throws if the point lies outside the field's supported rectangle.
Vec2 transform_point(const BSplineField& field, Vec2 p);

/// Displacement with the evaluation point clamped into the supported
/// rectangle, so the field extends continuously instead of throwing. Covering
/// fields are unaffected on their image rectangle.
Vec2 displacement_clamped(const BSplineField& field, Vec2 p);

class BSplineMap final : public CoordinateMap {
public:
    explicit BSplineMap(BSplineField field) : field_(std::move(field)) {}
    Vec2 map(Vec2 p) const override { return p + displacement_clamped(field_, p); }
    const BSplineField& field() const { return field_; }

private:
    BSplineField field_;
};

MapPtr make_bspline_map(BSplineField field);

/// Inverse of x -> x + d(x) by fixed-point iteration u <- z - d(u), to 1e-12
/// or 50 iterations. Valid while the displacement is a contraction, which
/// holds for the smooth fields the optimizer produces.
class BSplineInverseMap final : public CoordinateMap {
public:
    explicit BSplineInverseMap(BSplineField field) : field_(std::move(field)) {}
    Vec2 map(Vec2 z) const override;
    const BSplineField& field() const { return field_; }

private:
    BSplineField field_;
};

MapPtr make_bspline_inverse_map(BSplineField field);

struct OptimizerConfig {
    double lambda = 1.0;        // regularization weight
    double alpha = 0.5;         // step size, px of coefficient change per unit normalized gradient
    int max_iterations = 300;
    double epsilon = 1e-6;      // absolute loss-change stop tolerance
    int ncc_window_radius = 7;  // 15x15 neighborhood
    int sample_stride = 2;      // window-center subsampling
    double fill = 0.0;          // out-of-bounds sample value
    bool plain_descent = false; // raw fixed-alpha updates, no normalization/backtracking
    int max_backtrack = 5;
};

struct LossBreakdown {
    double total = 0.0;
    double ncc_term = 0.0;  // negated mean local NCC over evaluable windows
    double reg_term = 0.0;  // pre-lambda
    long valid_pixel_count = 0;
};

/// Local NCC similarity term between `fixed` and `moving` warped through the
/// field. Windows are centered on a stride-subsampled lattice and must lie
/// fully inside the image; zero-variance windows contribute 0. Throws when no
/// window fits.
double ncc_loss(const ScalarImage& fixed, const ScalarImage& moving, const BSplineField& field,
                const OptimizerConfig& cfg);

/// Diffusion regularizer of the dense displacement field on the full pixel
/// lattice, with forward differences scaled by the image dimensions.
double reg_loss(const BSplineField& field, int width, int height);

LossBreakdown evaluate_loss(const ScalarImage& fixed, const ScalarImage& moving,
                            const BSplineField& field, const OptimizerConfig& cfg);

/// Combined loss plus the analytic gradient with respect to every coefficient
/// (same layout as BSplineField::coeffs).
LossBreakdown loss_and_gradient(const ScalarImage& fixed, const ScalarImage& moving,
                                const BSplineField& field, const OptimizerConfig& cfg,
                                std::vector<double>* gradient);

// Composed-warp variants: the moving image is sampled at
// fixed_to_moving(s + d(s)), so an affine stage and the displacement field are
// applied in one resampling. The identity-affine forms above are the special
// case fixed_to_moving = I.
LossBreakdown evaluate_loss(const ScalarImage& fixed, const ScalarImage& moving,
                            const AffineTransform2D& fixed_to_moving, const BSplineField& field,
                            const OptimizerConfig& cfg);
LossBreakdown loss_and_gradient(const ScalarImage& fixed, const ScalarImage& moving,
                                const AffineTransform2D& fixed_to_moving,
                                const BSplineField& field, const OptimizerConfig& cfg,
                                std::vector<double>* gradient);

struct TracePoint {
    int iteration = 0;  // 0 is the initial evaluation
    double total = 0.0;
    double ncc = 0.0;
    double reg = 0.0;
    double alpha_used = 0.0;
};

struct OptimizeResult {
    BSplineField field;            // best-loss iterate
    std::vector<TracePoint> trace; // entry 0 is the initial loss
    LossBreakdown best;
};

/// Gradient descent on the control coefficients (steepest descent with
/// max-norm-normalized steps and backtracking by default; plain fixed-alpha
/// updates when cfg.plain_descent). Stops on |loss change| < epsilon, on
/// iteration exhaustion, or when backtracking cannot find a decrease.
OptimizeResult optimize(const ScalarImage& fixed, const ScalarImage& moving,
                        const BSplineField& init_field, const OptimizerConfig& cfg);

/// Same descent on the composed warp moving[fixed_to_moving(s + d(s))].
OptimizeResult optimize(const ScalarImage& fixed, const ScalarImage& moving,
                        const AffineTransform2D& fixed_to_moving, const BSplineField& init_field,
                        const OptimizerConfig& cfg);

// --- serialization -----------------------------------------------------------

std::string field_to_json(const BSplineField& field);
BSplineField field_from_json(const std::string& text);
void write_field(const BSplineField& field, const std::string& path);
BSplineField read_field(const std::string& path);

/// CSV `iteration,total,ncc,reg,alpha_used`.
void write_loss_trace_csv(const std::vector<TracePoint>& trace, const std::string& path);

}  // namespace slicereg
