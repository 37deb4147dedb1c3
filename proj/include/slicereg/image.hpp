#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace slicereg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

/// 2D grid of intensities in [0,1], row-major, pixel (x,y) at index y*width+x.
struct ScalarImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    ScalarImage() = default;
    ScalarImage(int w, int h, double value = 0.0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, value) {}

    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return pixels.size(); }
};

/// Bilinear sample at sub-pixel (x,y). Outside (-1,w)x(-1,h) the value is
/// `fill`; over the one-pixel apron the interpolant blends into `fill`, so the
/// function is continuous everywhere (the optimizer differentiates through it).
double sample_bilinear(const ScalarImage& img, double x, double y, double fill = 0.0);

/// Bilinear sample plus the exact in-cell partial derivatives d/dx, d/dy of the
/// interpolant. In the far fill region the derivatives are zero.
double sample_bilinear_grad(const ScalarImage& img, double x, double y, double fill,
                            double* gx, double* gy);

/// Block-mean downsampling. Output dims are ceil(dim/factor); partial border
/// blocks average over the pixels they actually cover.
ScalarImage downsample(const ScalarImage& img, int factor);

}  // namespace slicereg
