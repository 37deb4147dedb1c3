#include "slicereg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"
#include "slicereg/image_io.hpp"
#include "slicereg/json_io.hpp"

namespace fs = std::filesystem;

namespace slicereg {

namespace {

void set_workers(const Config& cfg) {
#ifdef _OPENMP
    if (cfg.workers >= 1) omp_set_num_threads(cfg.workers);
#else
    (void)cfg;
#endif
}

DetectorConfig detector_config(const Config& cfg) {
    DetectorConfig d;
    d.max_keypoints = cfg.detector_k;
    return d;
}

MatcherConfig matcher_config(const Config& cfg) {
    MatcherConfig m;
    m.ratio = cfg.match_ratio;
    return m;
}

RansacConfig ransac_config(const Config& cfg) {
    RansacConfig r;
    r.max_iterations = cfg.ransac_iterations;
    r.inlier_threshold = cfg.ransac_threshold;
    r.min_inliers = cfg.ransac_min_inliers;
    r.seed = cfg.seed;
    return r;
}

OptimizerConfig optimizer_config(const Config& cfg) {
    OptimizerConfig o;
    o.lambda = cfg.lambda;
    o.alpha = cfg.alpha;
    o.max_iterations = cfg.max_iterations;
    o.epsilon = cfg.epsilon;
    o.ncc_window_radius = cfg.ncc_window_radius;
    o.sample_stride = cfg.sample_stride;
    o.fill = cfg.fill_value;
    o.plain_descent = cfg.plain_descent;
    return o;
}

std::string matches_name(int fixed_index, int moving_index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "matches_%03d_%03d.txt", fixed_index, moving_index);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

}  // namespace

const char* to_string(PairStatus s) {
    switch (s) {
        case PairStatus::ok: return "ok";
        case PairStatus::affine_only: return "affine_only";
        case PairStatus::unregistrable: return "unregistrable";
    }
    return "unknown";
}

std::string pair_stem(int fixed_index, int moving_index) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "pair_%03d_%03d", fixed_index, moving_index);
    return buf;
}

std::string slice_stem(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slice_%03d", index);
    return buf;
}

MapPtr pair_forward_map(const PairResult& r) {
    if (r.status == PairStatus::unregistrable)
        throw std::logic_error("unregistrable pair has no map");
    MapPtr aff = make_affine_map(invert(r.affine));
    if (!r.has_field) return aff;
    return make_composed_map({make_bspline_map(r.field), aff});
}

MapPtr pair_inverse_map(const PairResult& r) {
    if (r.status == PairStatus::unregistrable)
        throw std::logic_error("unregistrable pair has no map");
    MapPtr aff = make_affine_map(r.affine);
    if (!r.has_field) return aff;
    return make_composed_map({aff, make_bspline_inverse_map(r.field)});
}

MapPtr stored_pair_map(const PairTransform& t, const BSplineField* field) {
    MapPtr aff = make_affine_map(invert(t.affine));
    if (!field) return aff;
    return make_composed_map({make_bspline_map(*field), aff});
}

PairResult register_pair(const ScalarImage& fixed, const ScalarImage& moving, const Config& cfg,
                         const MatchSet* imported) {
    set_workers(cfg);
    PairResult r;
    r.seed = cfg.seed;

    try {
        if (imported) {
            r.matches = *imported;
            r.rotation_deg = 0.0;
            const RansacResult rr = ransac_affine(r.matches, ransac_config(cfg));
            r.affine = rr.transform;
            r.inlier_count = rr.inlier_count;
        } else {
            RotationSweepResult sweep =
                rotation_sweep(fixed, moving, cfg.rotation_angles, detector_config(cfg),
                               matcher_config(cfg), ransac_config(cfg));
            r.rotation_deg = sweep.best_angle;
            r.matches = std::move(sweep.matches);
            r.affine = sweep.ransac.transform;
            r.inlier_count = sweep.ransac.inlier_count;
        }
    } catch (const std::exception& e) {
        r.status = PairStatus::unregistrable;
        r.failure = e.what();
        return r;
    }

    // one affine resampling; the refinement then works fixed-frame to
    // fixed-frame (the exported volume still composes the stored stages into a
    // single resampling)
    ScalarImage prewarped =
        warp(moving, AffineMap(invert(r.affine)), fixed.width, fixed.height, cfg.fill_value);
    if (cfg.store_warped) {
        r.prewarped = prewarped;
        r.has_prewarped = true;
    }

    r.field = make_field_covering(fixed.width, fixed.height, cfg.bspline_spacing);
    r.status = PairStatus::affine_only;
    try {
        OptimizeResult opt = optimize(fixed, prewarped, r.field, optimizer_config(cfg));
        r.trace = std::move(opt.trace);
        // trace rows carry the loss similarity term, which is the negated mean
        // windowed correlation; reports store the correlation itself
        r.initial_ncc = -r.trace.front().ncc;
        r.final_ncc = r.initial_ncc;
        if (-opt.best.ncc_term > r.initial_ncc) {
            r.status = PairStatus::ok;
            r.has_field = true;
            r.field = std::move(opt.field);
            r.final_ncc = -opt.best.ncc_term;
        }
    } catch (const std::exception&) {
        // refinement blew up or could not evaluate; the affine still stands
        r.status = PairStatus::affine_only;
    }
    return r;
}

bool SequenceResult::complete() const {
    for (const bool c : chained)
        if (!c) return false;
    return true;
}

SequenceResult register_sequence(const std::vector<ScalarImage>& slices, const Config& cfg) {
    const int n = static_cast<int>(slices.size());
    if (n < 2) throw std::invalid_argument("a sequence needs at least 2 sections");
    set_workers(cfg);

    SequenceResult res;
    res.reference_index = (cfg.reference == "middle") ? n / 2 : 0;

    for (int i = 0; i + 1 < n; ++i) {
        MatchSet imported;
        const MatchSet* imp = nullptr;
        if (!cfg.matches_dir.empty()) {
            MatchSet dims;
            dims.fixed_width = slices[i].width;
            dims.fixed_height = slices[i].height;
            dims.moving_width = slices[i + 1].width;
            dims.moving_height = slices[i + 1].height;
            const fs::path p = fs::path(cfg.matches_dir) / matches_name(i, i + 1);
            imported = import_matches(p.string(), dims);
            imp = &imported;
        }
        PairResult pr = register_pair(slices[i], slices[i + 1], cfg, imp);
        pr.fixed_index = i;
        pr.moving_index = i + 1;
        res.pairs.push_back(std::move(pr));
    }

    res.to_slice.assign(n, nullptr);
    res.chained.assign(n, false);
    const int r = res.reference_index;
    res.to_slice[r] = make_identity_map();
    res.chained[r] = true;
    for (int s = r + 1; s < n; ++s) {
        if (!res.chained[s - 1] || res.pairs[s - 1].status == PairStatus::unregistrable) break;
        res.to_slice[s] =
            make_composed_map({res.to_slice[s - 1], pair_forward_map(res.pairs[s - 1])});
        res.chained[s] = true;
    }
    for (int s = r - 1; s >= 0; --s) {
        if (!res.chained[s + 1] || res.pairs[s].status == PairStatus::unregistrable) break;
        res.to_slice[s] = make_composed_map({res.to_slice[s + 1], pair_inverse_map(res.pairs[s])});
        res.chained[s] = true;
    }
    return res;
}

namespace {

ScalarImage copy_onto_canvas(const ScalarImage& img, int cw, int ch, double fill) {
    ScalarImage out(cw, ch, fill);
    const int w = std::min(cw, img.width);
    const int h = std::min(ch, img.height);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(x, y);
    return out;
}

// Legacy schedule: resample at every hop toward the reference, and within a
// hop resample once for the field and once for the affine.
ScalarImage render_legacy(const std::vector<ScalarImage>& slices, const SequenceResult& seq,
                          int index, const Config& cfg) {
    const int r = seq.reference_index;
    ScalarImage img = slices[index];
    if (index > r) {
        for (int i = index - 1; i >= r; --i) {
            const PairResult& pr = seq.pairs[i];  // fixed=i, moving=i+1; img is in frame i+1
            const int cw = slices[i].width, ch = slices[i].height;
            img = warp(img, AffineMap(invert(pr.affine)), cw, ch, cfg.fill_value);
            if (pr.has_field) img = warp(img, BSplineMap(pr.field), cw, ch, cfg.fill_value);
        }
    } else {
        for (int i = index; i < r; ++i) {
            const PairResult& pr = seq.pairs[i];  // fixed=i, moving=i+1; img is in frame i
            if (pr.has_field)
                img = warp(img, BSplineInverseMap(pr.field), slices[i].width, slices[i].height,
                           cfg.fill_value);
            img = warp(img, AffineMap(pr.affine), slices[i + 1].width, slices[i + 1].height,
                       cfg.fill_value);
        }
    }
    return img;
}

}  // namespace

ScalarImage render_slice(const std::vector<ScalarImage>& slices, const SequenceResult& seq,
                         int index, const Config& cfg) {
    if (!seq.chained[index])
        throw std::invalid_argument("slice is not placed in the reference frame");
    const int cw = slices[seq.reference_index].width;
    const int ch = slices[seq.reference_index].height;
    if (index == seq.reference_index)
        return copy_onto_canvas(slices[index], cw, ch, cfg.fill_value);
    if (cfg.legacy_two_pass) return render_legacy(slices, seq, index, cfg);
    return warp(slices[index], *seq.to_slice[index], cw, ch, cfg.fill_value);
}

std::string transform_to_json(const PairTransform& t) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"a11\": " << fmt_double(t.affine.a11) << ",\n";
    os << "  \"a12\": " << fmt_double(t.affine.a12) << ",\n";
    os << "  \"a21\": " << fmt_double(t.affine.a21) << ",\n";
    os << "  \"a22\": " << fmt_double(t.affine.a22) << ",\n";
    os << "  \"tx\": " << fmt_double(t.affine.tx) << ",\n";
    os << "  \"ty\": " << fmt_double(t.affine.ty) << ",\n";
    os << "  \"rotation_deg\": " << fmt_double(t.rotation_deg) << ",\n";
    os << "  \"inlier_count\": " << t.inlier_count << ",\n";
    os << "  \"seed\": " << t.seed << "\n";
    os << "}\n";
    return os.str();
}

PairTransform transform_from_json(const std::string& text) {
    PairTransform t;
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        t.affine.a11 = j.at("a11").get<double>();
        t.affine.a12 = j.at("a12").get<double>();
        t.affine.a21 = j.at("a21").get<double>();
        t.affine.a22 = j.at("a22").get<double>();
        t.affine.tx = j.at("tx").get<double>();
        t.affine.ty = j.at("ty").get<double>();
        t.rotation_deg = j.at("rotation_deg").get<double>();
        t.inlier_count = j.at("inlier_count").get<int>();
        t.seed = j.at("seed").get<uint64_t>();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid transform JSON: ") + e.what());
    }
    return t;
}

void write_transform(const PairTransform& t, const std::string& path) {
    write_text(path, transform_to_json(t));
}

PairTransform read_transform(const std::string& path) {
    return transform_from_json(read_text(path));
}

void export_volume(const std::vector<ScalarImage>& slices, const SequenceResult& seq,
                   const Config& cfg, const std::string& out_dir) {
    const int n = static_cast<int>(slices.size());
    if (n == 0) throw std::invalid_argument("no slices to export");
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    const int cw = slices[seq.reference_index].width;
    const int ch = slices[seq.reference_index].height;

    // only slices connected to the reference enter the stack; the raw block is
    // exactly placed_count planes in slice order
    int placed = 0;
    for (int s = 0; s < n; ++s)
        if (seq.chained[s]) ++placed;

    std::vector<uint8_t> raw(static_cast<size_t>(placed) * cw * ch);
    int plane_idx = 0;
    for (int s = 0; s < n; ++s) {
        if (!seq.chained[s]) continue;
        const ScalarImage img = render_slice(slices, seq, s, cfg);
        save_png(img, (dir / (slice_stem(s) + ".png")).string());
        uint8_t* plane = raw.data() + static_cast<size_t>(plane_idx++) * cw * ch;
        for (size_t i = 0; i < img.size(); ++i) plane[i] = quantize8(img.pixels[i]);
    }
    {
        std::ofstream os(dir / "volume.raw", std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: volume.raw");
        os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!os) throw std::runtime_error("write failed: volume.raw");
    }
    {
        std::ostringstream hdr;
        hdr << "width " << cw << "\nheight " << ch << "\ndepth " << placed << "\n";
        hdr << "spacing_x " << fmt_double(cfg.spacing_x) << "\nspacing_y "
            << fmt_double(cfg.spacing_y) << "\nspacing_z " << fmt_double(cfg.spacing_z) << "\n";
        hdr << "format uint8 x-fastest\n";
        write_text((dir / "volume.txt").string(), hdr.str());
    }

    for (const PairResult& pr : seq.pairs) {
        const std::string stem = pair_stem(pr.fixed_index, pr.moving_index);
        if (pr.status != PairStatus::unregistrable) {
            PairTransform t{pr.affine, pr.rotation_deg, pr.inlier_count, pr.seed};
            write_transform(t, (dir / (stem + ".json")).string());
            if (pr.has_field) write_field(pr.field, (dir / (stem + ".field.json")).string());
            if (!pr.trace.empty())
                write_loss_trace_csv(pr.trace, (dir / (stem + ".trace.csv")).string());
            if (pr.has_prewarped)
                save_png(pr.prewarped, (dir / (stem + "_warped.png")).string());
        }
        if (!pr.matches.pairs.empty())
            write_matches(pr.matches, (dir / matches_name(pr.fixed_index, pr.moving_index)).string());
    }

    // manifest, written field by field so the byte stream is reproducible
    std::ostringstream m;
    m << "{\n";
    m << "  \"tool\": \"slicereg\",\n";
    m << "  \"slice_count\": " << n << ",\n";
    m << "  \"width\": " << cw << ",\n";
    m << "  \"height\": " << ch << ",\n";
    m << "  \"reference_index\": " << seq.reference_index << ",\n";
    m << "  \"placed_count\": " << placed << ",\n";
    m << "  \"spacing\": {\"x\": " << fmt_double(cfg.spacing_x) << ", \"y\": "
      << fmt_double(cfg.spacing_y) << ", \"z\": " << fmt_double(cfg.spacing_z) << "},\n";
    m << "  \"exit_status\": \"" << (seq.complete() ? "complete" : "partial") << "\",\n";
    m << "  \"config\": " << config_to_json(cfg, "  ") << ",\n";
    m << "  \"slices\": [\n";
    for (int s = 0; s < n; ++s) {
        m << "    {\"index\": " << s << ", \"file\": "
          << (seq.chained[s] ? "\"" + slice_stem(s) + ".png\"" : "null") << ", \"chained\": "
          << (seq.chained[s] ? "true" : "false") << ", \"reference\": "
          << (s == seq.reference_index ? "true" : "false") << "}" << (s + 1 < n ? "," : "") << "\n";
    }
    m << "  ],\n  \"pairs\": [\n";
    for (size_t i = 0; i < seq.pairs.size(); ++i) {
        const PairResult& pr = seq.pairs[i];
        const std::string stem = pair_stem(pr.fixed_index, pr.moving_index);
        const bool reg = pr.status != PairStatus::unregistrable;
        m << "    {\"fixed_index\": " << pr.fixed_index << ", \"moving_index\": "
          << pr.moving_index << ", \"status\": \"" << to_string(pr.status) << "\", ";
        m << "\"rotation_deg\": " << fmt_double(pr.rotation_deg) << ", \"inlier_count\": "
          << pr.inlier_count << ", ";
        m << "\"initial_ncc\": " << fmt_double(pr.initial_ncc) << ", \"final_ncc\": "
          << fmt_double(pr.final_ncc) << ", ";
        m << "\"transform\": " << (reg ? "\"" + stem + ".json\"" : "null") << ", ";
        m << "\"field\": " << (pr.has_field ? "\"" + stem + ".field.json\"" : "null") << ", ";
        m << "\"trace\": " << (reg && !pr.trace.empty() ? "\"" + stem + ".trace.csv\"" : "null")
          << ", ";
        m << "\"matches\": "
          << (!pr.matches.pairs.empty()
                  ? "\"" + matches_name(pr.fixed_index, pr.moving_index) + "\""
                  : "null");
        if (!reg) m << ", \"error\": \"" << json_escape(pr.failure) << "\"";
        m << "}" << (i + 1 < seq.pairs.size() ? "," : "") << "\n";
    }
    m << "  ]\n}\n";
    write_text((dir / "manifest.json").string(), m.str());
}

MetricsSummary evaluate_run(const std::string& run_dir, const std::string& landmarks_dir,
                            double pixel_size_um) {
    const fs::path dir(run_dir);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_text((dir / "manifest.json").string()));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("invalid manifest: ") + e.what());
    }

    const int w = manifest.at("width").get<int>();
    const int h = manifest.at("height").get<int>();
    double px_um = pixel_size_um;
    if (px_um <= 0.0) px_um = manifest.at("config").at("pixel_size_um").get<double>();

    std::vector<PairEvaluation> evals;
    for (const auto& p : manifest.at("pairs")) {
        if (p.at("status").get<std::string>() == "unregistrable") continue;
        const int fi = p.at("fixed_index").get<int>();
        const int mi = p.at("moving_index").get<int>();
        const PairTransform t = read_transform((dir / p.at("transform").get<std::string>()).string());
        BSplineField field;
        const BSplineField* field_ptr = nullptr;
        if (!p.at("field").is_null()) {
            field = read_field((dir / p.at("field").get<std::string>()).string());
            field_ptr = &field;
        }
        const MapPtr map = stored_pair_map(t, field_ptr);

        const fs::path flm = fs::path(landmarks_dir) / (slice_stem(fi) + ".csv");
        const fs::path mlm = fs::path(landmarks_dir) / (slice_stem(mi) + ".csv");
        const LandmarkSet fixed_lms = read_landmarks_csv(flm.string());
        const LandmarkSet moving_lms = read_landmarks_csv(mlm.string());

        PairEvaluation ev = evaluate_pair(fixed_lms, moving_lms, *map, w, h);
        ev.fixed_index = fi;
        ev.moving_index = mi;
        evals.push_back(ev);
    }
    if (evals.empty()) throw std::runtime_error("no registered pairs to evaluate");

    const MetricsSummary summary = aggregate(evals, px_um);
    write_metrics_json(evals, summary, px_um, (dir / "metrics.json").string());
    write_pair_metrics_csv(evals, (dir / "pair_metrics.csv").string());
    return summary;
}

}  // namespace slicereg
