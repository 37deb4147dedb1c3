#include "slicereg/coordmap.hpp"

#include <cmath>

namespace slicereg {

MapPtr make_identity_map() { return std::make_shared<IdentityMap>(); }

MapPtr make_affine_map(const AffineTransform2D& t) { return std::make_shared<AffineMap>(t); }

MapPtr make_composed_map(std::vector<MapPtr> maps) {
    return std::make_shared<ComposedMap>(std::move(maps));
}

ScalarImage warp(const ScalarImage& moving, const CoordinateMap& map, int out_width,
                 int out_height, double fill) {
    ScalarImage out(out_width, out_height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const Vec2 src = map.map({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = sample_bilinear(moving, src.x, src.y, fill);
        }
    }
    return out;
}

RotatedImage rotate_expand(const ScalarImage& img, double deg, double fill) {
    const double rad = deg * M_PI / 180.0;
    const double c = std::abs(std::cos(rad));
    const double s = std::abs(std::sin(rad));
    const int out_w = static_cast<int>(std::ceil(img.width * c + img.height * s - 1e-9));
    const int out_h = static_cast<int>(std::ceil(img.width * s + img.height * c - 1e-9));
    const Vec2 center{(img.width - 1) / 2.0, (img.height - 1) / 2.0};
    const Vec2 center_out{(out_w - 1) / 2.0, (out_h - 1) / 2.0};
    // Backward map: canvas -> original is the rotation by -deg about the centers.
    RotatedImage res;
    res.to_original = AffineTransform2D::rotation_about(-deg, center_out, center);
    AffineMap back(res.to_original);
    res.image = warp(img, back, out_w, out_h, fill);
    return res;
}

}  // namespace slicereg
