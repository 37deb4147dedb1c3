#include "slicereg/matching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "slicereg/coordmap.hpp"
#include "slicereg/json_io.hpp"
#include "slicereg/sat.hpp"

namespace slicereg {

namespace {

constexpr int kPatch = 16;        // descriptor patch side, 256 samples
constexpr int kMargin = 8;        // keeps the whole patch inside the level image
constexpr int kMinDetectSide = 32;

// Harris corners at one pyramid level; keypoint coordinates are mapped back to
// the original resolution with `factor`.
void detect_level(const ScalarImage& img, int factor, const DetectorConfig& cfg,
                  std::vector<Keypoint>& out) {
    const int w = img.width;
    const int h = img.height;
    const size_t n = static_cast<size_t>(w) * h;

    std::vector<double> gxx(n, 0.0), gyy(n, 0.0), gxy(n, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
            const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
            const size_t p = static_cast<size_t>(y) * w + x;
            gxx[p] = gx * gx;
            gyy[p] = gy * gy;
            gxy[p] = gx * gy;
        }
    }
    std::vector<double> Sxx, Syy, Sxy;
    build_sat(gxx, w, h, Sxx);
    build_sat(gyy, w, h, Syy);
    build_sat(gxy, w, h, Sxy);

    // 5x5 box structure tensor, computable wherever the window fits.
    std::vector<double> R(n, 0.0);
    const int sw = w + 1;
#pragma omp parallel for schedule(static)
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            const double sxx = sat_rect(Sxx, sw, x - 2, y - 2, x + 2, y + 2);
            const double syy = sat_rect(Syy, sw, x - 2, y - 2, x + 2, y + 2);
            const double sxy = sat_rect(Sxy, sw, x - 2, y - 2, x + 2, y + 2);
            const double tr = sxx + syy;
            R[static_cast<size_t>(y) * w + x] = sxx * syy - sxy * sxy - cfg.harris_k * tr * tr;
        }
    }

    // cancellation in the summed-area tables leaves ~1e-28 dust in flat
    // regions; a relative floor keeps detections to real structure
    double rmax = 0.0;
    for (double v : R) rmax = std::max(rmax, v);
    const double response_floor = 1e-9 * rmax;

    const int rad = cfg.nms_radius;
    for (int y = kMargin; y <= h - 1 - kMargin; ++y) {
        for (int x = kMargin; x <= w - 1 - kMargin; ++x) {
            const double r0 = R[static_cast<size_t>(y) * w + x];
            if (r0 <= response_floor) continue;
            // non-maximum suppression; equal responses keep the first in scan order
            bool keep = true;
            for (int dy = -rad; keep && dy <= rad; ++dy) {
                for (int dx = -rad; dx <= rad; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double rq = R[static_cast<size_t>(y + dy) * w + (x + dx)];
                    if (rq > r0 || (rq == r0 && (dy < 0 || (dy == 0 && dx < 0)))) {
                        keep = false;
                        break;
                    }
                }
            }
            if (!keep) continue;

            Keypoint kp;
            kp.descriptor.resize(kPatch * kPatch);
            double mean = 0.0;
            for (int j = 0; j < kPatch; ++j) {
                for (int i = 0; i < kPatch; ++i) {
                    const double v = sample_bilinear(img, x + i - (kPatch - 1) * 0.5,
                                                     y + j - (kPatch - 1) * 0.5);
                    kp.descriptor[static_cast<size_t>(j) * kPatch + i] = v;
                    mean += v;
                }
            }
            mean /= kPatch * kPatch;
            double sq = 0.0;
            for (double& v : kp.descriptor) {
                v -= mean;
                sq += v * v;
            }
            if (sq < 1e-12) continue;  // flat patch carries no appearance
            const double inv = 1.0 / std::sqrt(sq);
            for (double& v : kp.descriptor) v *= inv;

            kp.x = x * static_cast<double>(factor) + (factor - 1) * 0.5;
            kp.y = y * static_cast<double>(factor) + (factor - 1) * 0.5;
            kp.response = r0;
            out.push_back(std::move(kp));
        }
    }
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const ScalarImage& img, const DetectorConfig& cfg) {
    if (img.width < kMinDetectSide || img.height < kMinDetectSide)
        throw std::invalid_argument("image too small for keypoint detection (minimum 32x32)");
    if (cfg.max_keypoints < 4) throw std::invalid_argument("max_keypoints must be >= 4");

    std::vector<Keypoint> all;
    ScalarImage level = img;
    int factor = 1;
    for (int l = 0; l < cfg.levels; ++l) {
        if (l > 0) {
            level = downsample(level, 2);
            factor *= 2;
            if (level.width < kMinDetectSide || level.height < kMinDetectSide) break;
        }
        detect_level(level, factor, cfg, all);
    }
    if (all.size() < 4) throw std::runtime_error("degenerate content: fewer than 4 keypoints");

    std::sort(all.begin(), all.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    if (all.size() > static_cast<size_t>(cfg.max_keypoints)) all.resize(cfg.max_keypoints);
    return all;
}

MatchSet match_descriptors(const std::vector<Keypoint>& fixed_kps,
                           const std::vector<Keypoint>& moving_kps, const MatcherConfig& cfg) {
    MatchSet out;
    const int nf = static_cast<int>(fixed_kps.size());
    const int nm = static_cast<int>(moving_kps.size());
    if (nf == 0 || nm == 0) return out;
    const size_t dlen = fixed_kps[0].descriptor.size();

    std::vector<int> best_m(nf, -1);
    std::vector<double> s1(nf, -2.0), s2(nf, -2.0);
    std::vector<int> best_f(nm, -1);
    std::vector<double> sf(nm, -2.0), sf2(nm, -2.0);

    const bool keep_matrix = static_cast<size_t>(nf) * nm <= 8'000'000;
    std::vector<double> sim;
    if (keep_matrix) sim.resize(static_cast<size_t>(nf) * nm);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < nf; ++i) {
        const double* fd = fixed_kps[i].descriptor.data();
        for (int j = 0; j < nm; ++j) {
            const double* md = moving_kps[j].descriptor.data();
            double s = 0.0;
            for (size_t k = 0; k < dlen; ++k) s += fd[k] * md[k];
            if (keep_matrix) sim[static_cast<size_t>(i) * nm + j] = s;
            if (s > s1[i]) {
                s2[i] = s1[i];
                s1[i] = s;
                best_m[i] = j;
            } else if (s > s2[i]) {
                s2[i] = s;
            }
        }
    }
#pragma omp parallel for schedule(static)
    for (int j = 0; j < nm; ++j) {
        const double* md = moving_kps[j].descriptor.data();
        for (int i = 0; i < nf; ++i) {
            double s;
            if (keep_matrix) {
                s = sim[static_cast<size_t>(i) * nm + j];
            } else {
                const double* fd = fixed_kps[i].descriptor.data();
                s = 0.0;
                for (size_t k = 0; k < dlen; ++k) s += fd[k] * md[k];
            }
            if (s > sf[j]) {
                sf2[j] = sf[j];
                sf[j] = s;
                best_f[j] = i;
            } else if (s > sf2[j]) {
                sf2[j] = s;
            }
        }
    }

    for (int i = 0; i < nf; ++i) {
        const int j = best_m[i];
        if (j < 0 || best_f[j] != i) continue;
        // ratio test from both sides, so swapping the inputs mirrors the result
        const double d1 = 1.0 - s1[i];
        if (nm >= 2 && d1 > cfg.ratio * (1.0 - s2[i])) continue;
        if (nf >= 2 && d1 > cfg.ratio * (1.0 - sf2[j])) continue;
        out.pairs.push_back({{fixed_kps[i].x, fixed_kps[i].y},
                             {moving_kps[j].x, moving_kps[j].y},
                             s1[i]});
    }
    return out;
}

void write_matches(const MatchSet& matches, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# fixed_x,fixed_y,moving_x,moving_y,score\n";
    for (const MatchPair& m : matches.pairs) {
        os << fmt_double(m.fixed_point.x) << ',' << fmt_double(m.fixed_point.y) << ','
           << fmt_double(m.moving_point.x) << ',' << fmt_double(m.moving_point.y) << ','
           << fmt_double(m.score) << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

namespace {

double parse_field(const std::string& field, const std::string& path, int line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    // allow trailing spaces, nothing else
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == begin || (end && *end != '\0') || !std::isfinite(v))
        throw std::runtime_error(path + ":" + std::to_string(line) + ": invalid number '" + field +
                                 "'");
    return v;
}

}  // namespace

MatchSet import_matches(const std::string& path, const MatchSet& dims) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);

    MatchSet out = dims;
    out.pairs.clear();
    std::set<std::array<double, 4>> seen;

    std::string line;
    int ln = 0;
    while (std::getline(is, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 5)
            throw std::runtime_error(path + ":" + std::to_string(ln) +
                                     ": expected 5 comma-separated values");
        const double fx = parse_field(fields[0], path, ln);
        const double fy = parse_field(fields[1], path, ln);
        const double mx = parse_field(fields[2], path, ln);
        const double my = parse_field(fields[3], path, ln);
        const double sc = parse_field(fields[4], path, ln);

        if (dims.fixed_width > 0 && dims.fixed_height > 0 &&
            (fx < 0.0 || fx > dims.fixed_width - 1 || fy < 0.0 || fy > dims.fixed_height - 1))
            throw std::runtime_error(path + ":" + std::to_string(ln) +
                                     ": fixed point out of bounds");
        if (dims.moving_width > 0 && dims.moving_height > 0 &&
            (mx < 0.0 || mx > dims.moving_width - 1 || my < 0.0 || my > dims.moving_height - 1))
            throw std::runtime_error(path + ":" + std::to_string(ln) +
                                     ": moving point out of bounds");

        if (!seen.insert({fx, fy, mx, my}).second) continue;  // duplicate row
        out.pairs.push_back({{fx, fy}, {mx, my}, sc});
    }
    if (out.pairs.empty()) throw std::runtime_error(path + ": no match rows");
    return out;
}

RotationSweepResult rotation_sweep(const ScalarImage& fixed, const ScalarImage& moving,
                                   const std::vector<double>& angles_deg,
                                   const DetectorConfig& det_cfg, const MatcherConfig& match_cfg,
                                   const RansacConfig& ransac_cfg) {
    if (angles_deg.empty())
        throw std::invalid_argument("rotation sweep needs at least one candidate angle");
    const std::vector<Keypoint> fixed_kps = detect_keypoints(fixed, det_cfg);

    RotationSweepResult res;
    bool have_best = false;
    int best_count = 0;

    for (const double angle : angles_deg) {
        MatchSet ms;
        RansacResult rr;
        bool ok = false;
        try {
            // hypothesis: the moving section is rotated by `angle`; undo it
            const RotatedImage rot = rotate_expand(moving, -angle, 0.0);
            const std::vector<Keypoint> mov_kps = detect_keypoints(rot.image, det_cfg);
            ms = match_descriptors(fixed_kps, mov_kps, match_cfg);
            for (MatchPair& m : ms.pairs) m.moving_point = apply(rot.to_original, m.moving_point);
            ms.fixed_width = fixed.width;
            ms.fixed_height = fixed.height;
            ms.moving_width = moving.width;
            ms.moving_height = moving.height;
            ok = try_ransac_affine(ms, ransac_cfg, &rr);
        } catch (const std::exception&) {
            ok = false;  // this candidate angle is simply not usable
        }
        res.scores.push_back({angle, rr.inlier_count});
        if (!ok) continue;

        bool better = !have_best || rr.inlier_count > best_count;
        if (have_best && rr.inlier_count == best_count) {
            const double a = std::fabs(angle), b = std::fabs(res.best_angle);
            better = a < b || (a == b && angle > res.best_angle);
        }
        if (better) {
            have_best = true;
            best_count = rr.inlier_count;
            res.best_angle = angle;
            res.matches = std::move(ms);
            res.ransac = std::move(rr);
        }
    }
    if (!have_best)
        throw std::runtime_error(
            "pair unregistrable: no rotation candidate produced enough inliers");
    return res;
}

}  // namespace slicereg
