#include "slicereg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slicereg/rng.hpp"

namespace slicereg {

namespace {

// Seed streams, one purpose each, so regenerating any slice is independent of
// the others.
constexpr uint64_t kStreamTexture = 0;
constexpr uint64_t kStreamDrift = 2;
constexpr uint64_t kStreamSlice = 10;     // + slice index
constexpr uint64_t kStreamDegrade = 1000; // + slice index

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Reference texture: a smooth background with dense dot features, generously
// larger than the slice so posed slices keep sampling real content. Blob size
// follows texture_scale_px; dot density keeps the per-blob-area count fixed.
ScalarImage make_texture(const SynthConfig& cfg, int margin) {
    Rng rng(cfg.seed, kStreamTexture);
    const int tw = cfg.width + 2 * margin;
    const int th = cfg.height + 2 * margin;

    const double ts = cfg.texture_scale_px;
    const int cell = std::max(2, static_cast<int>(std::lround(ts)));
    ScalarImage coarse(tw / cell + 2, th / cell + 2);
    for (double& v : coarse.pixels) v = rng.uniform(0.35, 0.65);

    ScalarImage tex(tw, th);
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
            tex.at(x, y) = sample_bilinear(coarse, static_cast<double>(x) / cell,
                                           static_cast<double>(y) / cell, 0.5);

    const long ndots = std::max<long>(1, static_cast<long>(tw * th / (0.8 * ts * ts)));
    for (long d = 0; d < ndots; ++d) {
        const double cx = rng.uniform(0.0, tw - 1.0);
        const double cy = rng.uniform(0.0, th - 1.0);
        const double r = rng.uniform(0.09, 0.22) * ts;
        const double depth = rng.uniform(0.25, 0.5);
        const bool bright = rng.uniform() < 0.25;
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - 3 * r)));
        const int x1 = std::min(tw - 1, static_cast<int>(std::ceil(cx + 3 * r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - 3 * r)));
        const int y1 = std::min(th - 1, static_cast<int>(std::ceil(cy + 3 * r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (r * r);
                const double w = std::exp(-d2 * d2);  // steep rim, corner-rich
                tex.at(x, y) += bright ? 0.8 * depth * w : -depth * w;
            }
        }
    }
    for (double& v : tex.pixels) v = std::min(0.97, std::max(0.03, v));
    return tex;
}

// Structural drift: a very smooth signed field added with weight growing along
// the stack, modelling content that changes gradually from section to section.
ScalarImage make_drift(const SynthConfig& cfg, int margin) {
    Rng rng(cfg.seed, kStreamDrift);
    const int tw = cfg.width + 2 * margin;
    const int th = cfg.height + 2 * margin;
    const int cell = std::max(4, static_cast<int>(std::lround(4.0 * cfg.texture_scale_px)));
    ScalarImage coarse(tw / cell + 2, th / cell + 2);
    for (double& v : coarse.pixels) v = rng.uniform(-1.0, 1.0);
    ScalarImage field(tw, th);
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x)
            field.at(x, y) = sample_bilinear(coarse, static_cast<double>(x) / cell,
                                             static_cast<double>(y) / cell, 0.0);
    return field;
}

}  // namespace

ScalarImage apply_degradations(const ScalarImage& img, const SynthConfig& cfg, uint64_t stream) {
    Rng rng(cfg.seed, stream);
    ScalarImage out = img;
    const int w = out.width;
    const int h = out.height;

    for (int t = 0; t < cfg.tears; ++t) {
        double px = rng.uniform(0.0, w - 1.0);
        double py = rng.uniform(0.0, h - 1.0);
        double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double len = rng.uniform(0.25, 0.5) * std::min(w, h);
        const double width = rng.uniform(0.8, 1.6);
        const double dark = rng.uniform(0.15, 0.35);
        const int nseg = 4;
        for (int s = 0; s < nseg; ++s) {
            const double qx = px + std::cos(theta) * len / nseg;
            const double qy = py + std::sin(theta) * len / nseg;
            const int x0 = std::max(0, static_cast<int>(std::floor(std::min(px, qx) - width - 1)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(px, qx) + width + 1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(std::min(py, qy) - width - 1)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(py, qy) + width + 1)));
            const double vx = qx - px, vy = qy - py;
            const double vv = vx * vx + vy * vy;
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    double u = vv > 0.0 ? ((x - px) * vx + (y - py) * vy) / vv : 0.0;
                    u = std::min(1.0, std::max(0.0, u));
                    const double dx = x - (px + u * vx), dy = y - (py + u * vy);
                    if (dx * dx + dy * dy < width * width) out.at(x, y) *= dark;
                }
            }
            px = qx;
            py = qy;
            theta += rng.uniform(-0.45, 0.45);  // ragged path
        }
    }

    for (int f = 0; f < cfg.folds; ++f) {
        const double px = rng.uniform(0.0, w - 1.0);
        const double py = rng.uniform(0.0, h - 1.0);
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const double hw = rng.uniform(4.0, 8.0);
        const double nx = -std::sin(theta), ny = std::cos(theta);
        double mean = 0.0;
        long count = 0;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (std::fabs((x - px) * nx + (y - py) * ny) < hw) {
                    mean += out.at(x, y);
                    ++count;
                }
            }
        }
        if (count == 0) continue;
        mean /= count;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (std::fabs((x - px) * nx + (y - py) * ny) < hw)
                    out.at(x, y) = clamp01(mean + 2.0 * (out.at(x, y) - mean));
            }
        }
    }

    if (cfg.illumination_gain > 0.0) {
        // fixed ramp across x, factor 1-g at the left edge up to 1+g on the
        // right, mimicking uneven stage lighting
        const double g = cfg.illumination_gain;
        const double span = std::max(1.0, w - 1.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(x, y) = clamp01(out.at(x, y) * (1.0 - g + 2.0 * g * x / span));
    }
    return out;
}

SynthSequence generate_sequence(const SynthConfig& cfg) {
    if (cfg.width < 32 || cfg.height < 32)
        throw std::invalid_argument("synthetic slices must be at least 32x32");
    if (cfg.count < 2) throw std::invalid_argument("a sequence needs at least 2 slices");
    if (cfg.landmark_grid < 1) throw std::invalid_argument("landmark_grid must be >= 1");
    if (cfg.deform_spacing_px <= 0.0)
        throw std::invalid_argument("deform_spacing_px must be positive");
    if (cfg.deform_amplitude_px > 0.5 * cfg.deform_spacing_px)
        throw std::invalid_argument(
            "deform_amplitude_px must be at most half of deform_spacing_px, "
            "otherwise the synthetic field may fold over itself");

    const double maxrot = cfg.max_rotation_deg * M_PI / 180.0;
    const double maxscale = std::exp(std::fabs(cfg.max_log_scale));
    const int margin =
        static_cast<int>(std::ceil(0.5 * std::hypot(cfg.width, cfg.height) *
                                       (maxscale - 1.0 + std::sin(maxrot)) +
                                   cfg.max_translation_px + cfg.deform_amplitude_px)) +
        8;
    const ScalarImage texture = make_texture(cfg, margin);
    const bool with_drift = cfg.drift_gain != 0.0 && cfg.count > 1;
    const ScalarImage drift = with_drift ? make_drift(cfg, margin) : ScalarImage();

    // reference-frame landmarks on a uniform interior grid, shared by every slice
    const int g = cfg.landmark_grid;
    const double inset = 0.12 * std::min(cfg.width, cfg.height);
    std::vector<Vec2> ref_points;
    ref_points.reserve(static_cast<size_t>(g) * g);
    for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
            Vec2 p;
            p.x = g > 1 ? inset + i * (cfg.width - 1 - 2 * inset) / (g - 1)
                        : (cfg.width - 1) * 0.5;
            p.y = g > 1 ? inset + j * (cfg.height - 1 - 2 * inset) / (g - 1)
                        : (cfg.height - 1) * 0.5;
            ref_points.push_back(p);
        }
    }

    const Vec2 center{(cfg.width - 1) * 0.5, (cfg.height - 1) * 0.5};
    SynthSequence seq;
    seq.config = cfg;
    seq.slices.resize(cfg.count);

    for (int s = 0; s < cfg.count; ++s) {
        SynthSlice& slice = seq.slices[s];
        Rng rs(cfg.seed, kStreamSlice + static_cast<uint64_t>(s));

        slice.deform = make_field_covering(cfg.width, cfg.height, cfg.deform_spacing_px);
        if (s == 0) {
            slice.affine = AffineTransform2D::identity();
        } else {
            const double angle = rs.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
            const double tx = rs.uniform(-cfg.max_translation_px, cfg.max_translation_px);
            const double ty = rs.uniform(-cfg.max_translation_px, cfg.max_translation_px);
            double scale = 1.0;
            if (cfg.max_log_scale != 0.0)
                scale = std::exp(rs.uniform(-cfg.max_log_scale, cfg.max_log_scale));
            // scale(about center) o rotation(about center), then the translation
            AffineTransform2D pose = AffineTransform2D::rotation_about(angle, center, center);
            pose.a11 *= scale;
            pose.a12 *= scale;
            pose.a21 *= scale;
            pose.a22 *= scale;
            pose.tx = scale * pose.tx + (1.0 - scale) * center.x + tx;
            pose.ty = scale * pose.ty + (1.0 - scale) * center.y + ty;
            slice.affine = pose;
            for (double& c : slice.deform.coeffs)
                c = rs.uniform(-cfg.deform_amplitude_px, cfg.deform_amplitude_px);
        }

        const double drift_w =
            with_drift ? cfg.drift_gain * s / (cfg.count - 1.0) : 0.0;
        slice.image = ScalarImage(cfg.width, cfg.height);
#pragma omp parallel for schedule(static)
        for (int y = 0; y < cfg.height; ++y) {
            for (int x = 0; x < cfg.width; ++x) {
                const Vec2 z = transform_point(slice.deform, {static_cast<double>(x),
                                                              static_cast<double>(y)});
                const Vec2 p = apply(slice.affine, z);
                double v = sample_bilinear(texture, p.x + margin, p.y + margin, 0.5);
                if (with_drift)
                    v += drift_w * sample_bilinear(drift, p.x + margin, p.y + margin, 0.0);
                slice.image.at(x, y) = v;
            }
        }
        // noise drawn in row-major order after the pose/deform draws
        for (double& v : slice.image.pixels) v = clamp01(v + cfg.noise_sigma * rs.normal());

        if (cfg.tears > 0 || cfg.folds > 0 || cfg.illumination_gain > 0.0)
            slice.image = apply_degradations(slice.image, cfg,
                                             kStreamDegrade + static_cast<uint64_t>(s));

        // landmark positions solve affine(x + deform(x)) = ref point
        const AffineTransform2D inv = invert(slice.affine);
        const BSplineInverseMap definv(slice.deform);
        slice.landmarks.points.resize(ref_points.size());
        for (size_t i = 0; i < ref_points.size(); ++i) {
            slice.landmarks.points[i].id = static_cast<int>(i);
            slice.landmarks.points[i].p = definv.map(apply(inv, ref_points[i]));
        }
    }
    return seq;
}

}  // namespace slicereg
