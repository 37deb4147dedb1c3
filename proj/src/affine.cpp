#include "slicereg/affine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "affine_detail.hpp"
#include "slicereg/rng.hpp"

namespace slicereg {

AffineTransform2D AffineTransform2D::rotation_about(double deg, Vec2 c, Vec2 c_out) {
    const double rad = deg * M_PI / 180.0;
    const double co = std::cos(rad);
    const double si = std::sin(rad);
    AffineTransform2D t;
    t.a11 = co;
    t.a12 = -si;
    t.a21 = si;
    t.a22 = co;
    t.tx = c_out.x - (co * c.x - si * c.y);
    t.ty = c_out.y - (si * c.x + co * c.y);
    return t;
}

Vec2 apply(const AffineTransform2D& t, Vec2 p) {
    return {t.a11 * p.x + t.a12 * p.y + t.tx, t.a21 * p.x + t.a22 * p.y + t.ty};
}

AffineTransform2D compose(const AffineTransform2D& t2, const AffineTransform2D& t1) {
    AffineTransform2D r;
    r.a11 = t2.a11 * t1.a11 + t2.a12 * t1.a21;
    r.a12 = t2.a11 * t1.a12 + t2.a12 * t1.a22;
    r.a21 = t2.a21 * t1.a11 + t2.a22 * t1.a21;
    r.a22 = t2.a21 * t1.a12 + t2.a22 * t1.a22;
    r.tx = t2.a11 * t1.tx + t2.a12 * t1.ty + t2.tx;
    r.ty = t2.a21 * t1.tx + t2.a22 * t1.ty + t2.ty;
    return r;
}

AffineTransform2D invert(const AffineTransform2D& t) {
    const double d = t.det();
    if (std::abs(d) <= 1e-12) throw std::runtime_error("invert: near-singular affine transform");
    AffineTransform2D r;
    r.a11 = t.a22 / d;
    r.a12 = -t.a12 / d;
    r.a21 = -t.a21 / d;
    r.a22 = t.a11 / d;
    r.tx = -(r.a11 * t.tx + r.a12 * t.ty);
    r.ty = -(r.a21 * t.tx + r.a22 * t.ty);
    return r;
}

namespace detail {

// Fit moving->fixed affine from the pairs selected by `idx`. Returns false on a
// degenerate (collinear moving points) configuration.
bool fit_affine(const std::vector<MatchPair>& pairs, const int* idx, int n,
                AffineTransform2D* out) {
    double qxm = 0.0, qym = 0.0, pxm = 0.0, pym = 0.0;
    for (int k = 0; k < n; ++k) {
        const MatchPair& m = pairs[idx[k]];
        qxm += m.moving_point.x;
        qym += m.moving_point.y;
        pxm += m.fixed_point.x;
        pym += m.fixed_point.y;
    }
    qxm /= n;
    qym /= n;
    pxm /= n;
    pym /= n;

    // Centered normal equations: A = (sum p'q'^T)(sum q'q'^T)^-1, t from centroids.
    double cxx = 0.0, cxy = 0.0, cyy = 0.0;
    double bxx = 0.0, bxy = 0.0, byx = 0.0, byy = 0.0;
    for (int k = 0; k < n; ++k) {
        const MatchPair& m = pairs[idx[k]];
        const double qx = m.moving_point.x - qxm;
        const double qy = m.moving_point.y - qym;
        const double px = m.fixed_point.x - pxm;
        const double py = m.fixed_point.y - pym;
        cxx += qx * qx;
        cxy += qx * qy;
        cyy += qy * qy;
        bxx += px * qx;
        bxy += px * qy;
        byx += py * qx;
        byy += py * qy;
    }
    const double det = cxx * cyy - cxy * cxy;
    const double scale = 0.5 * (cxx + cyy);
    if (det <= 1e-9 * scale * scale || scale <= 0.0) return false;

    AffineTransform2D t;
    t.a11 = (bxx * cyy - bxy * cxy) / det;
    t.a12 = (bxy * cxx - bxx * cxy) / det;
    t.a21 = (byx * cyy - byy * cxy) / det;
    t.a22 = (byy * cxx - byx * cxy) / det;
    t.tx = pxm - (t.a11 * qxm + t.a12 * qym);
    t.ty = pym - (t.a21 * qxm + t.a22 * qym);
    *out = t;
    return true;
}

double residual(const AffineTransform2D& t, const MatchPair& m) {
    const Vec2 p = apply(t, m.moving_point);
    return norm(p - m.fixed_point);
}

// Canonical ordering makes sampling independent of the caller's match order.
std::vector<int> canonical_order(const std::vector<MatchPair>& pairs) {
    std::vector<int> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const MatchPair& u = pairs[a];
        const MatchPair& v = pairs[b];
        return std::tie(u.fixed_point.x, u.fixed_point.y, u.moving_point.x, u.moving_point.y,
                        u.score) < std::tie(v.fixed_point.x, v.fixed_point.y, v.moving_point.x,
                                            v.moving_point.y, v.score);
    });
    return order;
}

void sample_triple(Rng& rng, int n, int* out) {
    out[0] = static_cast<int>(rng.below(n));
    do {
        out[1] = static_cast<int>(rng.below(n));
    } while (out[1] == out[0]);
    do {
        out[2] = static_cast<int>(rng.below(n));
    } while (out[2] == out[0] || out[2] == out[1]);
}

}  // namespace detail

using detail::canonical_order;
using detail::fit_affine;
using detail::residual;
using detail::sample_triple;

AffineTransform2D estimate_least_squares(const MatchSet& matches) {
    const int n = static_cast<int>(matches.pairs.size());
    if (n < 3) throw std::invalid_argument("estimate_least_squares: need >= 3 pairs");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    AffineTransform2D t;
    if (!fit_affine(matches.pairs, idx.data(), n, &t))
        throw std::runtime_error("estimate_least_squares: degenerate (collinear) configuration");
    return t;
}

namespace {

// Core search; returns false when no model fits or the best model stays below
// cfg.min_inliers. `res` still describes the best model found, if any.
bool ransac_search(const MatchSet& matches, const RansacConfig& cfg, RansacResult& res) {
    const int n = static_cast<int>(matches.pairs.size());
    if (cfg.max_iterations < 1) throw std::invalid_argument("ransac_affine: max_iterations >= 1");

    const std::vector<int> order = canonical_order(matches.pairs);
    const std::vector<MatchPair>& pairs = matches.pairs;

    std::vector<int> counts(cfg.max_iterations, -1);
    std::vector<double> resids(cfg.max_iterations, 0.0);

    // Iterations are independent: each derives its sample from a counter-based
    // stream, so scores are identical however the loop is scheduled.
#pragma omp parallel for schedule(static)
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Rng rng(cfg.seed, static_cast<uint64_t>(it));
        int tri[3];
        sample_triple(rng, n, tri);
        int sel[3] = {order[tri[0]], order[tri[1]], order[tri[2]]};
        AffineTransform2D model;
        if (!fit_affine(pairs, sel, 3, &model)) continue;
        int count = 0;
        double rsum = 0.0;
        for (int k = 0; k < n; ++k) {  // canonical order keeps the sum order-invariant
            const double r = residual(model, pairs[order[k]]);
            if (r <= cfg.inlier_threshold) {
                ++count;
                rsum += r;
            }
        }
        counts[it] = count;
        resids[it] = count > 0 ? rsum / count : 0.0;
    }

    int best_it = -1;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        if (counts[it] < 0) continue;
        if (best_it < 0 || counts[it] > counts[best_it] ||
            (counts[it] == counts[best_it] && resids[it] < resids[best_it]))
            best_it = it;
    }
    if (best_it < 0) return false;

    // Reconstruct the winning minimal model and its inlier set.
    Rng rng(cfg.seed, static_cast<uint64_t>(best_it));
    int tri[3];
    sample_triple(rng, n, tri);
    int sel[3] = {order[tri[0]], order[tri[1]], order[tri[2]]};
    AffineTransform2D model;
    fit_affine(pairs, sel, 3, &model);

    MatchSet inliers;
    inliers.fixed_width = matches.fixed_width;
    inliers.fixed_height = matches.fixed_height;
    inliers.moving_width = matches.moving_width;
    inliers.moving_height = matches.moving_height;
    for (int k = 0; k < n; ++k) {  // canonical order so the re-fit is order-invariant too
        const int i = order[k];
        if (residual(model, pairs[i]) <= cfg.inlier_threshold) {
            res.inlier_indices.push_back(i);
            inliers.pairs.push_back(pairs[i]);
        }
    }
    res.inlier_count = static_cast<int>(res.inlier_indices.size());
    res.mean_residual = resids[best_it];
    res.transform = estimate_least_squares(inliers);
    std::sort(res.inlier_indices.begin(), res.inlier_indices.end());
    return res.inlier_count >= cfg.min_inliers;
}

}  // namespace

bool try_ransac_affine(const MatchSet& matches, const RansacConfig& cfg, RansacResult* out) {
    *out = RansacResult{};
    if (matches.pairs.size() < 3) return false;
    return ransac_search(matches, cfg, *out);
}

RansacResult ransac_affine(const MatchSet& matches, const RansacConfig& cfg) {
    if (matches.pairs.size() < 3) throw std::invalid_argument("ransac_affine: need >= 3 matches");
    RansacResult res;
    if (!ransac_search(matches, cfg, res))
        throw std::runtime_error("pair unregistrable: RANSAC inlier count below minimum");
    return res;
}

}  // namespace slicereg
