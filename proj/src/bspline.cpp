#include "slicereg/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "slicereg/json_io.hpp"
#include "slicereg/sat.hpp"

namespace slicereg {

BSplineField make_field_covering(int width, int height, double spacing) {
    if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
    if (!(spacing > 0.0)) throw std::invalid_argument("control spacing must be positive");
    BSplineField f;
    f.spacing_x = spacing;
    f.spacing_y = spacing;
    f.origin_x = -spacing;
    f.origin_y = -spacing;
    f.nx = static_cast<int>(std::floor((width - 1) / spacing)) + 4;
    f.ny = static_cast<int>(std::floor((height - 1) / spacing)) + 4;
    f.coeffs.assign(2 * static_cast<size_t>(f.nx) * f.ny, 0.0);
    return f;
}

std::array<double, 4> basis_cubic(double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    const double omu = 1.0 - u;
    return {omu * omu * omu / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0};
}

namespace {

// Cell index and basis weights along one axis; cell i needs controls i-1..i+2.
struct AxisSupport {
    int cell = 0;
    std::array<double, 4> w{};
};

AxisSupport axis_support(double coord, double origin, double spacing, int n) {
    const double g = (coord - origin) / spacing;
    const int i = static_cast<int>(std::floor(g));
    if (i < 1 || i > n - 3) throw std::out_of_range("point outside B-spline field support");
    return {i, basis_cubic(g - i)};
}

Vec2 displacement_at(const BSplineField& f, const AxisSupport& ax, const AxisSupport& ay) {
    double dx = 0.0;
    double dy = 0.0;
    for (int b = 0; b < 4; ++b) {
        const int j = ay.cell - 1 + b;
        double sx = 0.0;
        double sy = 0.0;
        for (int a = 0; a < 4; ++a) {
            const int i = ax.cell - 1 + a;
            sx += ax.w[a] * f.cx(i, j);
            sy += ax.w[a] * f.cy(i, j);
        }
        dx += ay.w[b] * sx;
        dy += ay.w[b] * sy;
    }
    return {dx, dy};
}

}  // namespace

Vec2 transform_point(const BSplineField& field, Vec2 p) {
    const AxisSupport ax = axis_support(p.x, field.origin_x, field.spacing_x, field.nx);
    const AxisSupport ay = axis_support(p.y, field.origin_y, field.spacing_y, field.ny);
    const Vec2 d = displacement_at(field, ax, ay);
    return {p.x + d.x, p.y + d.y};
}

Vec2 displacement_clamped(const BSplineField& field, Vec2 p) {
    // valid grid coordinates are [1, n-2); clamp just inside
    const double eps = 1e-9;
    const double xlo = field.origin_x + field.spacing_x;
    const double xhi = field.origin_x + field.spacing_x * (field.nx - 2) - eps;
    const double ylo = field.origin_y + field.spacing_y;
    const double yhi = field.origin_y + field.spacing_y * (field.ny - 2) - eps;
    const Vec2 q{std::min(std::max(p.x, xlo), std::max(xlo, xhi)),
                 std::min(std::max(p.y, ylo), std::max(ylo, yhi))};
    const AxisSupport ax = axis_support(q.x, field.origin_x, field.spacing_x, field.nx);
    const AxisSupport ay = axis_support(q.y, field.origin_y, field.spacing_y, field.ny);
    return displacement_at(field, ax, ay);
}

MapPtr make_bspline_map(BSplineField field) { return std::make_shared<BSplineMap>(std::move(field)); }

Vec2 BSplineInverseMap::map(Vec2 z) const {
    Vec2 u = z;
    for (int it = 0; it < 50; ++it) {
        const Vec2 d = displacement_clamped(field_, u);
        const Vec2 next{z.x - d.x, z.y - d.y};
        const double step = std::max(std::fabs(next.x - u.x), std::fabs(next.y - u.y));
        u = next;
        if (step < 1e-12) break;
    }
    return u;
}

MapPtr make_bspline_inverse_map(BSplineField field) {
    return std::make_shared<BSplineInverseMap>(std::move(field));
}

namespace {

struct DenseEval {
    std::vector<double> warped;  // moving sampled at T(p), fixed-image lattice
    std::vector<double> mgx;     // moving image x-derivative at T(p)
    std::vector<double> mgy;
    std::vector<double> ux;      // displacement components at p
    std::vector<double> uy;
};

// f2m == nullptr means identity: samples at s + d(s). Otherwise the sampling
// point is f2m(s + d(s)) and the image gradient is chained through the
// constant linear part of f2m, so mgx/mgy are always derivatives of the warped
// value with respect to the displacement components.
void eval_dense(const ScalarImage& fixed, const ScalarImage& moving, const BSplineField& field,
                const AffineTransform2D* f2m, double fill, bool want_grad, DenseEval& out) {
    const int w = fixed.width;
    const int h = fixed.height;
    std::vector<AxisSupport> sx(w), sy(h);
    for (int x = 0; x < w; ++x) sx[x] = axis_support(x, field.origin_x, field.spacing_x, field.nx);
    for (int y = 0; y < h; ++y) sy[y] = axis_support(y, field.origin_y, field.spacing_y, field.ny);

    const size_t n = static_cast<size_t>(w) * h;
    out.warped.resize(n);
    out.ux.resize(n);
    out.uy.resize(n);
    if (want_grad) {
        out.mgx.resize(n);
        out.mgy.resize(n);
    }
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const Vec2 d = displacement_at(field, sx[x], sy[y]);
            out.ux[row + x] = d.x;
            out.uy[row + x] = d.y;
            Vec2 q{x + d.x, y + d.y};
            if (f2m) q = apply(*f2m, q);
            if (want_grad) {
                double gx, gy;
                out.warped[row + x] = sample_bilinear_grad(moving, q.x, q.y, fill, &gx, &gy);
                if (f2m) {
                    out.mgx[row + x] = gx * f2m->a11 + gy * f2m->a21;
                    out.mgy[row + x] = gx * f2m->a12 + gy * f2m->a22;
                } else {
                    out.mgx[row + x] = gx;
                    out.mgy[row + x] = gy;
                }
            } else {
                out.warped[row + x] = sample_bilinear(moving, q.x, q.y, fill);
            }
        }
    }
}

constexpr double kVarianceFloor = 1e-10;

struct WindowGrid {
    int ncx = 0;
    int ncy = 0;
    int r = 0;
    int stride = 0;
    long count() const { return static_cast<long>(ncx) * ncy; }
};

WindowGrid window_grid(int w, int h, const OptimizerConfig& cfg) {
    const int r = cfg.ncc_window_radius;
    const int stride = cfg.sample_stride;
    if (r < 1) throw std::invalid_argument("ncc_window_radius must be >= 1");
    if (stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
    if (w < 2 * r + 1 || h < 2 * r + 1)
        throw std::invalid_argument("no NCC window fits inside the fixed image");
    return {(w - 1 - 2 * r) / stride + 1, (h - 1 - 2 * r) / stride + 1, r, stride};
}

// Per-window statistics needed by the adjoint, zero for degenerate windows.
struct WindowStats {
    std::vector<double> invd;       // 1/sqrt(Sd1*Sd2)
    std::vector<double> invd_mut;   // invd * fixed-window mean
    std::vector<double> beta;       // NCC/Sd2
    std::vector<double> beta_mum;   // beta * warped-window mean
};

double ncc_window_sum(const ScalarImage& fixed, const std::vector<double>& warped, int w, int h,
                      const WindowGrid& g, WindowStats* stats) {
    std::vector<double> t2(fixed.pixels.size()), w2(warped.size()), tw(warped.size());
    for (size_t i = 0; i < warped.size(); ++i) {
        t2[i] = fixed.pixels[i] * fixed.pixels[i];
        w2[i] = warped[i] * warped[i];
        tw[i] = fixed.pixels[i] * warped[i];
    }
    std::vector<double> St, St2, Sw, Sw2, Stw;
    build_sat(fixed.pixels, w, h, St);
    build_sat(t2, w, h, St2);
    build_sat(warped, w, h, Sw);
    build_sat(w2, w, h, Sw2);
    build_sat(tw, w, h, Stw);

    if (stats) {
        const size_t nw = static_cast<size_t>(g.count());
        stats->invd.assign(nw, 0.0);
        stats->invd_mut.assign(nw, 0.0);
        stats->beta.assign(nw, 0.0);
        stats->beta_mum.assign(nw, 0.0);
    }

    const int sw = w + 1;
    const double npix = static_cast<double>(2 * g.r + 1) * (2 * g.r + 1);
    double total = 0.0;
    for (int l = 0; l < g.ncy; ++l) {
        const int cy = g.r + l * g.stride;
        for (int k = 0; k < g.ncx; ++k) {
            const int cx = g.r + k * g.stride;
            const int x0 = cx - g.r, x1 = cx + g.r, y0 = cy - g.r, y1 = cy + g.r;
            const double st = sat_rect(St, sw, x0, y0, x1, y1);
            const double st2 = sat_rect(St2, sw, x0, y0, x1, y1);
            const double sm = sat_rect(Sw, sw, x0, y0, x1, y1);
            const double sm2 = sat_rect(Sw2, sw, x0, y0, x1, y1);
            const double stm = sat_rect(Stw, sw, x0, y0, x1, y1);
            const double mut = st / npix;
            const double mum = sm / npix;
            const double sd1 = st2 - npix * mut * mut;
            const double sd2 = sm2 - npix * mum * mum;
            if (sd1 < kVarianceFloor || sd2 < kVarianceFloor) continue;
            const double snum = stm - npix * mut * mum;
            const double invd = 1.0 / std::sqrt(sd1 * sd2);
            const double ncc = snum * invd;
            total += ncc;
            if (stats) {
                const size_t idx = static_cast<size_t>(l) * g.ncx + k;
                stats->invd[idx] = invd;
                stats->invd_mut[idx] = invd * mut;
                stats->beta[idx] = ncc / sd2;
                stats->beta_mum[idx] = stats->beta[idx] * mum;
            }
        }
    }
    return total;
}

double reg_sum(const std::vector<double>& ux, const std::vector<double>& uy, int w, int h) {
    double lx = 0.0;
    double ly = 0.0;
    for (int y = 0; y < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        for (int x = 0; x + 1 < w; ++x) {
            const double dx = ux[row + x + 1] - ux[row + x];
            const double dy = uy[row + x + 1] - uy[row + x];
            lx += dx * dx + dy * dy;
        }
    }
    for (int y = 0; y + 1 < h; ++y) {
        const size_t row = static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            const double dx = ux[row + w + x] - ux[row + x];
            const double dy = uy[row + w + x] - uy[row + x];
            ly += dx * dx + dy * dy;
        }
    }
    double total = 0.0;
    if (w > 1) total += 0.5 * (static_cast<double>(w) * w / (static_cast<double>(w - 1) * h)) * lx;
    if (h > 1) total += 0.5 * (static_cast<double>(h) * h / (static_cast<double>(w) * (h - 1))) * ly;
    return total;
}

LossBreakdown loss_core(const ScalarImage& fixed, const ScalarImage& moving,
                        const AffineTransform2D* f2m, const BSplineField& field,
                        const OptimizerConfig& cfg, std::vector<double>* gradient) {
    const int w = fixed.width;
    const int h = fixed.height;
    const WindowGrid grid = window_grid(w, h, cfg);

    DenseEval dense;
    eval_dense(fixed, moving, field, f2m, cfg.fill, gradient != nullptr, dense);

    WindowStats stats;
    const double nccsum =
        ncc_window_sum(fixed, dense.warped, w, h, grid, gradient ? &stats : nullptr);

    LossBreakdown out;
    out.valid_pixel_count = grid.count();
    out.ncc_term = -nccsum / static_cast<double>(grid.count());
    out.reg_term = reg_sum(dense.ux, dense.uy, w, h);
    out.total = out.ncc_term + cfg.lambda * out.reg_term;
    if (!gradient) return out;

    // Sums of per-window stats over all windows covering a pixel, via SATs on
    // the window-center grid.
    std::vector<double> S1, S2, S3, S4;
    build_sat(stats.invd, grid.ncx, grid.ncy, S1);
    build_sat(stats.invd_mut, grid.ncx, grid.ncy, S2);
    build_sat(stats.beta, grid.ncx, grid.ncy, S3);
    build_sat(stats.beta_mum, grid.ncx, grid.ncy, S4);
    const int csw = grid.ncx + 1;
    const double inv_nw = 1.0 / static_cast<double>(grid.count());
    const double sxx = (w > 1) ? static_cast<double>(w) * w / (static_cast<double>(w - 1) * h) : 0.0;
    const double syy = (h > 1) ? static_cast<double>(h) * h / (static_cast<double>(w) * (h - 1)) : 0.0;

    std::vector<AxisSupport> sx(w), sy(h);
    for (int x = 0; x < w; ++x) sx[x] = axis_support(x, field.origin_x, field.spacing_x, field.nx);
    for (int y = 0; y < h; ++y) sy[y] = axis_support(y, field.origin_y, field.spacing_y, field.ny);

    // Scatter into fixed-height row strips with per-strip partial gradients,
    // combined in strip order: the result is independent of the thread count.
    const int strip_h = 16;
    const int nstrips = (h + strip_h - 1) / strip_h;
    const size_t ncoef = field.coeffs.size();
    std::vector<std::vector<double>> partials(nstrips);
#pragma omp parallel for schedule(static)
    for (int s = 0; s < nstrips; ++s) {
        std::vector<double>& buf = partials[s];
        buf.assign(ncoef, 0.0);
        const int y_end = std::min(h, (s + 1) * strip_h);
        for (int y = s * strip_h; y < y_end; ++y) {
            const size_t row = static_cast<size_t>(y) * w;
            int l0 = 0;
            if (y > 2 * grid.r) l0 = (y - 2 * grid.r + grid.stride - 1) / grid.stride;
            const int l1 = std::min(grid.ncy - 1, y / grid.stride);
            for (int x = 0; x < w; ++x) {
                const size_t p = row + x;
                double adj = 0.0;
                int k0 = 0;
                if (x > 2 * grid.r) k0 = (x - 2 * grid.r + grid.stride - 1) / grid.stride;
                const int k1 = std::min(grid.ncx - 1, x / grid.stride);
                if (k0 <= k1 && l0 <= l1) {
                    const double a1 = sat_rect(S1, csw, k0, l0, k1, l1);
                    const double a2 = sat_rect(S2, csw, k0, l0, k1, l1);
                    const double a3 = sat_rect(S3, csw, k0, l0, k1, l1);
                    const double a4 = sat_rect(S4, csw, k0, l0, k1, l1);
                    adj = -inv_nw *
                          (fixed.pixels[p] * a1 - a2 - dense.warped[p] * a3 + a4);
                }
                double gx = adj * dense.mgx[p];
                double gy = adj * dense.mgy[p];
                // diffusion term adjoint: forward differences touching p
                double rx = 0.0, ry = 0.0;
                if (x >= 1) {
                    rx += sxx * (dense.ux[p] - dense.ux[p - 1]);
                    ry += sxx * (dense.uy[p] - dense.uy[p - 1]);
                }
                if (x + 1 < w) {
                    rx -= sxx * (dense.ux[p + 1] - dense.ux[p]);
                    ry -= sxx * (dense.uy[p + 1] - dense.uy[p]);
                }
                if (y >= 1) {
                    rx += syy * (dense.ux[p] - dense.ux[p - w]);
                    ry += syy * (dense.uy[p] - dense.uy[p - w]);
                }
                if (y + 1 < h) {
                    rx -= syy * (dense.ux[p + w] - dense.ux[p]);
                    ry -= syy * (dense.uy[p + w] - dense.uy[p]);
                }
                gx += cfg.lambda * rx;
                gy += cfg.lambda * ry;
                if (gx == 0.0 && gy == 0.0) continue;
                for (int b = 0; b < 4; ++b) {
                    const int j = sy[y].cell - 1 + b;
                    const double wy = sy[y].w[b];
                    for (int a = 0; a < 4; ++a) {
                        const int i = sx[x].cell - 1 + a;
                        const double wgt = wy * sx[x].w[a];
                        const size_t c = 2 * (static_cast<size_t>(j) * field.nx + i);
                        buf[c] += wgt * gx;
                        buf[c + 1] += wgt * gy;
                    }
                }
            }
        }
    }
    gradient->assign(ncoef, 0.0);
    for (int s = 0; s < nstrips; ++s) {
        const std::vector<double>& buf = partials[s];
        for (size_t c = 0; c < ncoef; ++c) (*gradient)[c] += buf[c];
    }
    return out;
}

}  // namespace

double ncc_loss(const ScalarImage& fixed, const ScalarImage& moving, const BSplineField& field,
                const OptimizerConfig& cfg) {
    return loss_core(fixed, moving, nullptr, field, cfg, nullptr).ncc_term;
}

double reg_loss(const BSplineField& field, int width, int height) {
    if (width < 1 || height < 1) throw std::invalid_argument("image dimensions must be positive");
    std::vector<AxisSupport> sx(width), sy(height);
    for (int x = 0; x < width; ++x) sx[x] = axis_support(x, field.origin_x, field.spacing_x, field.nx);
    for (int y = 0; y < height; ++y) sy[y] = axis_support(y, field.origin_y, field.spacing_y, field.ny);
    std::vector<double> ux(static_cast<size_t>(width) * height), uy(ux.size());
#pragma omp parallel for schedule(static)
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec2 d = displacement_at(field, sx[x], sy[y]);
            ux[static_cast<size_t>(y) * width + x] = d.x;
            uy[static_cast<size_t>(y) * width + x] = d.y;
        }
    }
    return reg_sum(ux, uy, width, height);
}

LossBreakdown evaluate_loss(const ScalarImage& fixed, const ScalarImage& moving,
                            const BSplineField& field, const OptimizerConfig& cfg) {
    return loss_core(fixed, moving, nullptr, field, cfg, nullptr);
}

LossBreakdown loss_and_gradient(const ScalarImage& fixed, const ScalarImage& moving,
                                const BSplineField& field, const OptimizerConfig& cfg,
                                std::vector<double>* gradient) {
    if (!gradient) throw std::invalid_argument("gradient output must not be null");
    return loss_core(fixed, moving, nullptr, field, cfg, gradient);
}

LossBreakdown evaluate_loss(const ScalarImage& fixed, const ScalarImage& moving,
                            const AffineTransform2D& fixed_to_moving, const BSplineField& field,
                            const OptimizerConfig& cfg) {
    return loss_core(fixed, moving, &fixed_to_moving, field, cfg, nullptr);
}

LossBreakdown loss_and_gradient(const ScalarImage& fixed, const ScalarImage& moving,
                                const AffineTransform2D& fixed_to_moving,
                                const BSplineField& field, const OptimizerConfig& cfg,
                                std::vector<double>* gradient) {
    if (!gradient) throw std::invalid_argument("gradient output must not be null");
    return loss_core(fixed, moving, &fixed_to_moving, field, cfg, gradient);
}

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

// largest per-control-point displacement vector norm
double max_coeff_norm(const std::vector<double>& coeffs) {
    double m = 0.0;
    for (size_t c = 0; c + 1 < coeffs.size(); c += 2)
        m = std::max(m, std::hypot(coeffs[c], coeffs[c + 1]));
    return m;
}

}  // namespace

namespace {

OptimizeResult optimize_core(const ScalarImage& fixed, const ScalarImage& moving,
                             const AffineTransform2D* f2m, const BSplineField& init_field,
                             const OptimizerConfig& cfg) {
    OptimizeResult res;
    BSplineField field = init_field;
    std::vector<double> grad;
    LossBreakdown cur = loss_core(fixed, moving, f2m, field, cfg, &grad);
    if (!std::isfinite(cur.total))
        throw std::runtime_error("non-finite loss at iteration 0");
    res.trace.push_back({0, cur.total, cur.ncc_term, cur.reg_term, 0.0});
    res.field = field;
    res.best = cur;
    double best_total = cur.total;
    // Coefficient magnitudes beyond a quarter of the short image side mean the
    // descent has run away; such steps are rejected.
    const double coeff_limit = 0.25 * std::min(fixed.width, fixed.height);

    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const double gmax = max_abs(grad);
        if (gmax == 0.0) break;

        BSplineField cand = field;
        LossBreakdown cand_loss;
        std::vector<double> cand_grad;
        double alpha_used = 0.0;
        bool accepted = false;

        if (cfg.plain_descent) {
            for (size_t c = 0; c < cand.coeffs.size(); ++c)
                cand.coeffs[c] = field.coeffs[c] - cfg.alpha * grad[c];
            if (max_coeff_norm(cand.coeffs) > coeff_limit) break;
            cand_loss = loss_core(fixed, moving, f2m, cand, cfg, &cand_grad);
            if (!std::isfinite(cand_loss.total))
                throw std::runtime_error("non-finite loss at iteration " + std::to_string(it));
            alpha_used = cfg.alpha;
            accepted = true;
        } else {
            double a = cfg.alpha;
            for (int bt = 0; bt <= cfg.max_backtrack; ++bt, a *= 0.5) {
                for (size_t c = 0; c < cand.coeffs.size(); ++c)
                    cand.coeffs[c] = field.coeffs[c] - (a / gmax) * grad[c];
                if (max_coeff_norm(cand.coeffs) > coeff_limit) continue;
                cand_loss = loss_core(fixed, moving, f2m, cand, cfg, &cand_grad);
                if (!std::isfinite(cand_loss.total)) continue;
                if (cand_loss.total < cur.total) {
                    alpha_used = a;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }

        const double delta = std::fabs(cur.total - cand_loss.total);
        field = std::move(cand);
        cur = cand_loss;
        grad = std::move(cand_grad);
        res.trace.push_back({it, cur.total, cur.ncc_term, cur.reg_term, alpha_used});
        if (cur.total < best_total) {
            best_total = cur.total;
            res.field = field;
            res.best = cur;
        }
        if (delta < cfg.epsilon) break;
    }
    return res;
}

}  // namespace

OptimizeResult optimize(const ScalarImage& fixed, const ScalarImage& moving,
                        const BSplineField& init_field, const OptimizerConfig& cfg) {
    return optimize_core(fixed, moving, nullptr, init_field, cfg);
}

OptimizeResult optimize(const ScalarImage& fixed, const ScalarImage& moving,
                        const AffineTransform2D& fixed_to_moving, const BSplineField& init_field,
                        const OptimizerConfig& cfg) {
    return optimize_core(fixed, moving, &fixed_to_moving, init_field, cfg);
}

std::string field_to_json(const BSplineField& field) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"grid\": {\"nx\": " << field.nx << ", \"ny\": " << field.ny << "},\n";
    os << "  \"spacing\": {\"x\": " << fmt_double(field.spacing_x) << ", \"y\": "
       << fmt_double(field.spacing_y) << "},\n";
    os << "  \"origin\": {\"x\": " << fmt_double(field.origin_x) << ", \"y\": "
       << fmt_double(field.origin_y) << "},\n";
    os << "  \"coefficients\": [";
    for (size_t c = 0; c < field.coeffs.size(); ++c) {
        if (c) os << ", ";
        os << fmt_double(field.coeffs[c]);
    }
    os << "]\n}\n";
    return os.str();
}

BSplineField field_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid field JSON: ") + e.what());
    }
    BSplineField f;
    try {
        f.nx = j.at("grid").at("nx").get<int>();
        f.ny = j.at("grid").at("ny").get<int>();
        f.spacing_x = j.at("spacing").at("x").get<double>();
        f.spacing_y = j.at("spacing").at("y").get<double>();
        f.origin_x = j.at("origin").at("x").get<double>();
        f.origin_y = j.at("origin").at("y").get<double>();
        f.coeffs = j.at("coefficients").get<std::vector<double>>();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid field JSON: ") + e.what());
    }
    if (f.nx < 4 || f.ny < 4) throw std::runtime_error("invalid field JSON: grid must be at least 4x4");
    if (!(f.spacing_x > 0.0) || !(f.spacing_y > 0.0))
        throw std::runtime_error("invalid field JSON: spacing must be positive");
    if (f.coeffs.size() != 2 * static_cast<size_t>(f.nx) * f.ny)
        throw std::runtime_error("invalid field JSON: coefficient count mismatch");
    return f;
}

void write_field(const BSplineField& field, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << field_to_json(field);
    if (!os) throw std::runtime_error("write failed: " + path);
}

BSplineField read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return field_from_json(buf.str());
}

void write_loss_trace_csv(const std::vector<TracePoint>& trace, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "iteration,total,ncc,reg,alpha_used\n";
    for (const TracePoint& t : trace) {
        os << t.iteration << ',' << fmt_double(t.total) << ',' << fmt_double(t.ncc) << ','
           << fmt_double(t.reg) << ',' << fmt_double(t.alpha_used) << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace slicereg
