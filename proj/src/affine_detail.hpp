#pragma once

#include <vector>

#include "slicereg/affine.hpp"
#include "slicereg/matchset.hpp"
#include "slicereg/rng.hpp"

namespace slicereg::detail {

/// Internal pieces shared by the parallel RANSAC and its serial reference, so
/// both make bit-identical decisions.

bool fit_affine(const std::vector<MatchPair>& pairs, const int* idx, int n, AffineTransform2D* out);

double residual(const AffineTransform2D& t, const MatchPair& m);

std::vector<int> canonical_order(const std::vector<MatchPair>& pairs);

void sample_triple(Rng& rng, int n, int* out);

}  // namespace slicereg::detail
