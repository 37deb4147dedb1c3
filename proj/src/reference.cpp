#include "slicereg/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "affine_detail.hpp"

namespace slicereg {

ScalarImage warp_reference(const ScalarImage& moving, const CoordinateMap& map, int out_width,
                           int out_height, double fill) {
    ScalarImage out(out_width, out_height);
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            const Vec2 p = map.map({static_cast<double>(x), static_cast<double>(y)});
            out.at(x, y) = sample_bilinear(moving, p.x, p.y, fill);
        }
    }
    return out;
}

namespace {

struct Windows {
    int ncx = 0, ncy = 0, r = 0, stride = 0;
};

Windows windows_for(int w, int h, const OptimizerConfig& cfg) {
    const int r = cfg.ncc_window_radius;
    if (w < 2 * r + 1 || h < 2 * r + 1)
        throw std::invalid_argument("no NCC window fits inside the fixed image");
    return {(w - 1 - 2 * r) / cfg.sample_stride + 1, (h - 1 - 2 * r) / cfg.sample_stride + 1, r,
            cfg.sample_stride};
}

}  // namespace

namespace {

double ncc_loss_reference_core(const ScalarImage& fixed, const ScalarImage& moving,
                               const AffineTransform2D* f2m, const BSplineField& field,
                               const OptimizerConfig& cfg) {
    const int w = fixed.width, h = fixed.height;
    const Windows win = windows_for(w, h, cfg);

    std::vector<double> warped(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Vec2 t = transform_point(field, {static_cast<double>(x), static_cast<double>(y)});
            if (f2m) t = apply(*f2m, t);
            warped[static_cast<size_t>(y) * w + x] = sample_bilinear(moving, t.x, t.y, cfg.fill);
        }

    const int n = (2 * win.r + 1) * (2 * win.r + 1);
    double total = 0.0;
    for (int l = 0; l < win.ncy; ++l) {
        for (int k = 0; k < win.ncx; ++k) {
            const int cx = win.r + k * win.stride;
            const int cy = win.r + l * win.stride;
            double st = 0.0, sm = 0.0;
            for (int dy = -win.r; dy <= win.r; ++dy)
                for (int dx = -win.r; dx <= win.r; ++dx) {
                    st += fixed.at(cx + dx, cy + dy);
                    sm += warped[static_cast<size_t>(cy + dy) * w + (cx + dx)];
                }
            const double mut = st / n, mum = sm / n;
            double sd1 = 0.0, sd2 = 0.0, snum = 0.0;
            for (int dy = -win.r; dy <= win.r; ++dy)
                for (int dx = -win.r; dx <= win.r; ++dx) {
                    const double ft = fixed.at(cx + dx, cy + dy) - mut;
                    const double fm = warped[static_cast<size_t>(cy + dy) * w + (cx + dx)] - mum;
                    sd1 += ft * ft;
                    sd2 += fm * fm;
                    snum += ft * fm;
                }
            if (sd1 < 1e-10 || sd2 < 1e-10) continue;
            total += snum / std::sqrt(sd1 * sd2);
        }
    }
    return -total / (static_cast<double>(win.ncx) * win.ncy);
}

}  // namespace

double ncc_loss_reference(const ScalarImage& fixed, const ScalarImage& moving,
                          const BSplineField& field, const OptimizerConfig& cfg) {
    return ncc_loss_reference_core(fixed, moving, nullptr, field, cfg);
}

double ncc_loss_reference(const ScalarImage& fixed, const ScalarImage& moving,
                          const AffineTransform2D& fixed_to_moving, const BSplineField& field,
                          const OptimizerConfig& cfg) {
    return ncc_loss_reference_core(fixed, moving, &fixed_to_moving, field, cfg);
}

double reg_loss_reference(const BSplineField& field, int width, int height) {
    std::vector<double> ux(static_cast<size_t>(width) * height), uy(ux.size());
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const Vec2 t = transform_point(field, {static_cast<double>(x), static_cast<double>(y)});
            ux[static_cast<size_t>(y) * width + x] = t.x - x;
            uy[static_cast<size_t>(y) * width + x] = t.y - y;
        }
    double lx = 0.0, ly = 0.0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x + 1 < width; ++x) {
            const size_t p = static_cast<size_t>(y) * width + x;
            lx += (ux[p + 1] - ux[p]) * (ux[p + 1] - ux[p]) +
                  (uy[p + 1] - uy[p]) * (uy[p + 1] - uy[p]);
        }
    for (int y = 0; y + 1 < height; ++y)
        for (int x = 0; x < width; ++x) {
            const size_t p = static_cast<size_t>(y) * width + x;
            ly += (ux[p + width] - ux[p]) * (ux[p + width] - ux[p]) +
                  (uy[p + width] - uy[p]) * (uy[p + width] - uy[p]);
        }
    double total = 0.0;
    if (width > 1)
        total += 0.5 * (static_cast<double>(width) * width / (static_cast<double>(width - 1) * height)) * lx;
    if (height > 1)
        total += 0.5 * (static_cast<double>(height) * height / (static_cast<double>(width) * (height - 1))) * ly;
    return total;
}

namespace {

LossBreakdown loss_and_gradient_reference_core(const ScalarImage& fixed, const ScalarImage& moving,
                                               const AffineTransform2D* f2m,
                                               const BSplineField& field,
                                               const OptimizerConfig& cfg,
                                               std::vector<double>* gradient) {
    const int w = fixed.width, h = fixed.height;
    const Windows win = windows_for(w, h, cfg);
    const size_t npix = static_cast<size_t>(w) * h;

    std::vector<double> warped(npix), mgx(npix), mgy(npix), ux(npix), uy(npix);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            Vec2 t = transform_point(field, {static_cast<double>(x), static_cast<double>(y)});
            ux[p] = t.x - x;
            uy[p] = t.y - y;
            if (f2m) t = apply(*f2m, t);
            double gx, gy;
            warped[p] = sample_bilinear_grad(moving, t.x, t.y, cfg.fill, &gx, &gy);
            if (f2m) {
                mgx[p] = gx * f2m->a11 + gy * f2m->a21;
                mgy[p] = gx * f2m->a12 + gy * f2m->a22;
            } else {
                mgx[p] = gx;
                mgy[p] = gy;
            }
        }

    const long nw = static_cast<long>(win.ncx) * win.ncy;
    const int n = (2 * win.r + 1) * (2 * win.r + 1);
    double total_ncc = 0.0;
    std::vector<double> adj(npix, 0.0);
    for (int l = 0; l < win.ncy; ++l) {
        for (int k = 0; k < win.ncx; ++k) {
            const int cx = win.r + k * win.stride;
            const int cy = win.r + l * win.stride;
            double st = 0.0, sm = 0.0;
            for (int dy = -win.r; dy <= win.r; ++dy)
                for (int dx = -win.r; dx <= win.r; ++dx) {
                    st += fixed.at(cx + dx, cy + dy);
                    sm += warped[static_cast<size_t>(cy + dy) * w + (cx + dx)];
                }
            const double mut = st / n, mum = sm / n;
            double sd1 = 0.0, sd2 = 0.0, snum = 0.0;
            for (int dy = -win.r; dy <= win.r; ++dy)
                for (int dx = -win.r; dx <= win.r; ++dx) {
                    const double ft = fixed.at(cx + dx, cy + dy) - mut;
                    const double fm = warped[static_cast<size_t>(cy + dy) * w + (cx + dx)] - mum;
                    sd1 += ft * ft;
                    sd2 += fm * fm;
                    snum += ft * fm;
                }
            if (sd1 < 1e-10 || sd2 < 1e-10) continue;
            const double invd = 1.0 / std::sqrt(sd1 * sd2);
            const double ncc = snum * invd;
            total_ncc += ncc;
            const double beta = ncc / sd2;
            for (int dy = -win.r; dy <= win.r; ++dy)
                for (int dx = -win.r; dx <= win.r; ++dx) {
                    const size_t p = static_cast<size_t>(cy + dy) * w + (cx + dx);
                    const double ft = fixed.pixels[p] - mut;
                    const double fm = warped[p] - mum;
                    adj[p] += (-1.0 / nw) * (invd * ft - beta * fm);
                }
        }
    }

    LossBreakdown out;
    out.valid_pixel_count = nw;
    out.ncc_term = -total_ncc / nw;
    out.reg_term = reg_loss_reference(field, w, h);
    out.total = out.ncc_term + cfg.lambda * out.reg_term;
    if (!gradient) return out;

    const double sxx = (w > 1) ? static_cast<double>(w) * w / (static_cast<double>(w - 1) * h) : 0.0;
    const double syy = (h > 1) ? static_cast<double>(h) * h / (static_cast<double>(w) * (h - 1)) : 0.0;
    gradient->assign(field.coeffs.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            double gx = adj[p] * mgx[p];
            double gy = adj[p] * mgy[p];
            double rx = 0.0, ry = 0.0;
            if (x >= 1) {
                rx += sxx * (ux[p] - ux[p - 1]);
                ry += sxx * (uy[p] - uy[p - 1]);
            }
            if (x + 1 < w) {
                rx -= sxx * (ux[p + 1] - ux[p]);
                ry -= sxx * (uy[p + 1] - uy[p]);
            }
            if (y >= 1) {
                rx += syy * (ux[p] - ux[p - w]);
                ry += syy * (uy[p] - uy[p - w]);
            }
            if (y + 1 < h) {
                rx -= syy * (ux[p + w] - ux[p]);
                ry -= syy * (uy[p + w] - uy[p]);
            }
            gx += cfg.lambda * rx;
            gy += cfg.lambda * ry;
            if (gx == 0.0 && gy == 0.0) continue;

            const double gxc = (x - field.origin_x) / field.spacing_x;
            const double gyc = (y - field.origin_y) / field.spacing_y;
            const int ci = static_cast<int>(std::floor(gxc));
            const int cj = static_cast<int>(std::floor(gyc));
            const auto bx = basis_cubic(gxc - ci);
            const auto by = basis_cubic(gyc - cj);
            for (int b = 0; b < 4; ++b)
                for (int a = 0; a < 4; ++a) {
                    const size_t c =
                        2 * (static_cast<size_t>(cj - 1 + b) * field.nx + (ci - 1 + a));
                    (*gradient)[c] += by[b] * bx[a] * gx;
                    (*gradient)[c + 1] += by[b] * bx[a] * gy;
                }
        }
    }
    return out;
}

}  // namespace

LossBreakdown loss_and_gradient_reference(const ScalarImage& fixed, const ScalarImage& moving,
                                          const BSplineField& field, const OptimizerConfig& cfg,
                                          std::vector<double>* gradient) {
    return loss_and_gradient_reference_core(fixed, moving, nullptr, field, cfg, gradient);
}

LossBreakdown loss_and_gradient_reference(const ScalarImage& fixed, const ScalarImage& moving,
                                          const AffineTransform2D& fixed_to_moving,
                                          const BSplineField& field, const OptimizerConfig& cfg,
                                          std::vector<double>* gradient) {
    return loss_and_gradient_reference_core(fixed, moving, &fixed_to_moving, field, cfg, gradient);
}

RansacResult ransac_affine_reference(const MatchSet& matches, const RansacConfig& cfg) {
    const int n = static_cast<int>(matches.pairs.size());
    if (n < 3) throw std::invalid_argument("ransac_affine: need >= 3 matches");

    const std::vector<int> order = detail::canonical_order(matches.pairs);
    const std::vector<MatchPair>& pairs = matches.pairs;

    int best_it = -1, best_count = -1;
    double best_resid = 0.0;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Rng rng(cfg.seed, static_cast<uint64_t>(it));
        int tri[3];
        detail::sample_triple(rng, n, tri);
        int sel[3] = {order[tri[0]], order[tri[1]], order[tri[2]]};
        AffineTransform2D model;
        if (!detail::fit_affine(pairs, sel, 3, &model)) continue;
        int count = 0;
        double rsum = 0.0;
        for (int k = 0; k < n; ++k) {
            const double r = detail::residual(model, pairs[order[k]]);
            if (r <= cfg.inlier_threshold) {
                ++count;
                rsum += r;
            }
        }
        const double resid = count > 0 ? rsum / count : 0.0;
        if (count > best_count || (count == best_count && resid < best_resid)) {
            best_it = it;
            best_count = count;
            best_resid = resid;
        }
    }
    if (best_it < 0 || best_count < cfg.min_inliers)
        throw std::runtime_error("pair unregistrable: RANSAC inlier count below minimum");

    Rng rng(cfg.seed, static_cast<uint64_t>(best_it));
    int tri[3];
    detail::sample_triple(rng, n, tri);
    int sel[3] = {order[tri[0]], order[tri[1]], order[tri[2]]};
    AffineTransform2D model;
    detail::fit_affine(pairs, sel, 3, &model);

    RansacResult res;
    MatchSet inliers;
    for (int k = 0; k < n; ++k) {
        const int i = order[k];
        if (detail::residual(model, pairs[i]) <= cfg.inlier_threshold) {
            res.inlier_indices.push_back(i);
            inliers.pairs.push_back(pairs[i]);
        }
    }
    res.inlier_count = static_cast<int>(res.inlier_indices.size());
    res.mean_residual = best_resid;
    res.transform = estimate_least_squares(inliers);
    std::sort(res.inlier_indices.begin(), res.inlier_indices.end());
    return res;
}

}  // namespace slicereg
