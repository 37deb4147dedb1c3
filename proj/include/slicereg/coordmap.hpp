#pragma once

#include <memory>
#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/image.hpp"

namespace slicereg {

/// Evaluable mapping from one image frame to another. Evaluation is
/// deterministic and total; implementations are immutable and safe to share.
class CoordinateMap {
public:
    virtual ~CoordinateMap() = default;
    virtual Vec2 map(Vec2 p) const = 0;
};

using MapPtr = std::shared_ptr<const CoordinateMap>;

class IdentityMap final : public CoordinateMap {
public:
    Vec2 map(Vec2 p) const override { return p; }
};

class AffineMap final : public CoordinateMap {
public:
    explicit AffineMap(const AffineTransform2D& t) : t_(t) {}
    Vec2 map(Vec2 p) const override { return apply(t_, p); }
    const AffineTransform2D& transform() const { return t_; }

private:
    AffineTransform2D t_;
};

/// Applies `maps[0]` first, then `maps[1]`, and so on.
class ComposedMap final : public CoordinateMap {
public:
    explicit ComposedMap(std::vector<MapPtr> maps) : maps_(std::move(maps)) {}
    Vec2 map(Vec2 p) const override {
        for (const auto& m : maps_) p = m->map(p);
        return p;
    }

private:
    std::vector<MapPtr> maps_;
};

MapPtr make_identity_map();
MapPtr make_affine_map(const AffineTransform2D& t);
MapPtr make_composed_map(std::vector<MapPtr> maps);

/// Backward-mapping warp: out(x,y) = sample_bilinear(moving, map(x,y)).
ScalarImage warp(const ScalarImage& moving, const CoordinateMap& map, int out_width,
                 int out_height, double fill = 0.0);

struct RotatedImage {
    ScalarImage image;               // rotated copy on an expanded canvas
    AffineTransform2D to_original;   // rotated-canvas coords -> original coords
};

/// Rotate an image by `deg` about its center, expanding the canvas so nothing
/// is cropped. `to_original` maps canvas coordinates back to the input frame.
RotatedImage rotate_expand(const ScalarImage& img, double deg, double fill = 0.0);

}  // namespace slicereg
