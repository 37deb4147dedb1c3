#include "slicereg/image.hpp"

#include <cmath>
#include <stdexcept>

namespace slicereg {

namespace {

// Out-of-range neighbors take the fill value, so the interpolant blends into
// fill across a one-pixel apron instead of jumping. Keeping the sampled
// function continuous at the border matters: optimization differentiates
// through it, and a value jump under an infinitesimal displacement would make
// window statistics (and the loss) discontinuous.
inline double corner(const ScalarImage& img, int x, int y, double fill) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return fill;
    return img.at(x, y);
}

}  // namespace

double sample_bilinear(const ScalarImage& img, double x, double y, double fill) {
    if (x <= -1.0 || y <= -1.0 || x >= img.width || y >= img.height) return fill;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const double p00 = corner(img, x0, y0, fill);
    const double p10 = corner(img, x0 + 1, y0, fill);
    const double p01 = corner(img, x0, y0 + 1, fill);
    const double p11 = corner(img, x0 + 1, y0 + 1, fill);
    const double top = p00 + fx * (p10 - p00);
    const double bot = p01 + fx * (p11 - p01);
    return top + fy * (bot - top);
}

double sample_bilinear_grad(const ScalarImage& img, double x, double y, double fill,
                            double* gx, double* gy) {
    if (x <= -1.0 || y <= -1.0 || x >= img.width || y >= img.height) {
        *gx = 0.0;
        *gy = 0.0;
        return fill;
    }
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const double p00 = corner(img, x0, y0, fill);
    const double p10 = corner(img, x0 + 1, y0, fill);
    const double p01 = corner(img, x0, y0 + 1, fill);
    const double p11 = corner(img, x0 + 1, y0 + 1, fill);
    *gx = (1.0 - fy) * (p10 - p00) + fy * (p11 - p01);
    *gy = (1.0 - fx) * (p01 - p00) + fx * (p11 - p10);
    const double top = p00 + fx * (p10 - p00);
    const double bot = p01 + fx * (p11 - p01);
    return top + fy * (bot - top);
}

ScalarImage downsample(const ScalarImage& img, int factor) {
    if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (factor == 1) return img;
    const int ow = (img.width + factor - 1) / factor;
    const int oh = (img.height + factor - 1) / factor;
    ScalarImage out(ow, oh);
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const int x0 = ox * factor;
            const int y0 = oy * factor;
            const int x1 = std::min(x0 + factor, img.width);
            const int y1 = std::min(y0 + factor, img.height);
            double sum = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) sum += img.at(x, y);
            out.at(ox, oy) = sum / ((x1 - x0) * (y1 - y0));
        }
    }
    return out;
}

}  // namespace slicereg
