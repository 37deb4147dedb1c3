#pragma once

#include <cstddef>
#include <vector>

namespace slicereg {

/// Summed-area table with a zero border: S gets (w+1)x(h+1) entries and
/// S[(y+1)*(w+1)+(x+1)] holds the sum of v over [0..x]x[0..y]. Row prefixes are
/// computed per row and column prefixes per column, so the summation order does
/// not depend on the thread count.
inline void build_sat(const std::vector<double>& v, int w, int h, std::vector<double>& S) {
    const int sw = w + 1;
    S.assign(static_cast<size_t>(sw) * (h + 1), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        const double* row = &v[static_cast<size_t>(y) * w];
        double* out = &S[static_cast<size_t>(y + 1) * sw];
        double acc = 0.0;
        for (int x = 0; x < w; ++x) {
            acc += row[x];
            out[x + 1] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int x = 1; x <= w; ++x) {
        for (int y = 2; y <= h; ++y) {
            S[static_cast<size_t>(y) * sw + x] += S[static_cast<size_t>(y - 1) * sw + x];
        }
    }
}

/// Inclusive rectangle sum over [x0..x1]x[y0..y1]; sw = table row stride (w+1).
inline double sat_rect(const std::vector<double>& S, int sw, int x0, int y0, int x1, int y1) {
    return S[static_cast<size_t>(y1 + 1) * sw + (x1 + 1)] -
           S[static_cast<size_t>(y0) * sw + (x1 + 1)] -
           S[static_cast<size_t>(y1 + 1) * sw + x0] + S[static_cast<size_t>(y0) * sw + x0];
}

}  // namespace slicereg
