#pragma once

#include <vector>

#include "slicereg/image.hpp"

namespace slicereg {

/// Detected interest point with a unit-normalized appearance descriptor.
struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double response = 0.0;
    std::vector<double> descriptor;
};

struct MatchPair {
    Vec2 fixed_point;
    Vec2 moving_point;
    double score = 0.0;  // descriptor similarity in [-1,1]
};

/// Point correspondences between a fixed and a moving image, with the image
/// dimensions they were established in.
struct MatchSet {
    std::vector<MatchPair> pairs;
    int fixed_width = 0;
    int fixed_height = 0;
    int moving_width = 0;
    int moving_height = 0;
};

}  // namespace slicereg
