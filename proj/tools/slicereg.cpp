// Command-line front end: pairwise registration, sequence stacking, stored
// transform application, landmark evaluation, and synthetic data generation.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slicereg/config.hpp"
#include "slicereg/image_io.hpp"
#include "slicereg/json_io.hpp"
#include "slicereg/metrics.hpp"
#include "slicereg/pipeline.hpp"
#include "slicereg/synth.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace slicereg;

namespace {

// Every pipeline tunable as a CLI option (underscore and dash spellings), with
// file values applied first and explicit flags on top.
struct ConfigCli {
    std::string config_path;
    std::map<std::string, std::string> raw;
    std::vector<std::pair<std::string, CLI::Option*>> opts;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "flat 'key = value' configuration file");
        const std::pair<const char*, const char*> keys[] = {
            {"detector_k", "keypoints kept per image"},
            {"match_ratio", "nearest/second-nearest descriptor distance ratio"},
            {"rotation_angles", "comma-separated candidate rotations, degrees"},
            {"ransac_iterations", "RANSAC iteration count"},
            {"ransac_threshold", "inlier residual threshold, pixels"},
            {"ransac_min_inliers", "minimum inliers for a usable model"},
            {"seed", "random seed"},
            {"bspline_spacing", "control point spacing, pixels"},
            {"lambda", "displacement smoothness weight"},
            {"alpha", "descent step size"},
            {"max_iterations", "maximum descent iterations"},
            {"epsilon", "loss-change stopping tolerance"},
            {"ncc_window_radius", "similarity window radius, pixels"},
            {"sample_stride", "window center stride, pixels"},
            {"plain_descent", "fixed-step descent without backtracking"},
            {"reference", "reference section: first or middle"},
            {"spacing_x", "voxel spacing along x"},
            {"spacing_y", "voxel spacing along y"},
            {"spacing_z", "voxel spacing along z (section thickness)"},
            {"fill_value", "intensity for out-of-bounds samples"},
            {"workers", "worker thread count"},
            {"legacy_two_pass", "resample once per transform stage instead of once total"},
            {"store_warped", "also write the affine-prewarped moving image per pair"},
            {"matches_dir", "read matches_NNN_MMM.txt files instead of detecting"},
            {"pixel_size_um", "physical pixel size for distance metrics"},
        };
        for (const auto& [key, desc] : keys) {
            std::string dashed = key;
            for (char& c : dashed) {
                if (c == '_') c = '-';
            }
            std::string names = "--" + std::string(key);
            if (dashed != key) names += ",--" + dashed;
            opts.emplace_back(key, app->add_option(names, raw[key], desc));
        }
    }

    Config resolve() const {
        Config cfg = default_config();
        if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
        for (const auto& [key, opt] : opts) {
            if (opt->count() > 0) apply_config_entry(cfg, key, raw.at(key));
        }
        return cfg;
    }
};

void print_pair_line(const PairResult& pr) {
    std::printf("pair %03d->%03d: %s", pr.moving_index, pr.fixed_index, to_string(pr.status));
    if (pr.status == PairStatus::unregistrable) {
        std::printf(" (%s)\n", pr.failure.c_str());
        return;
    }
    std::printf(", rotation %g deg, %d inliers", pr.rotation_deg, pr.inlier_count);
    if (pr.status == PairStatus::ok)
        std::printf(", ncc %.4f -> %.4f", pr.initial_ncc, pr.final_ncc);
    std::printf("\n");
}

int run_register_pair(const std::string& fixed_path, const std::string& moving_path,
                      const std::string& out_dir, const ConfigCli& ccli) {
    Config cfg = ccli.resolve();
    cfg.reference = "first";
    std::vector<ScalarImage> slices;
    slices.push_back(load_image(fixed_path));
    slices.push_back(load_image(moving_path));
    const SequenceResult seq = register_sequence(slices, cfg);
    export_volume(slices, seq, cfg, out_dir);
    print_pair_line(seq.pairs[0]);
    return seq.pairs[0].status == PairStatus::unregistrable ? 3 : 0;
}

int run_register_sequence(const std::vector<std::string>& image_paths, const std::string& out_dir,
                          const ConfigCli& ccli) {
    if (image_paths.size() < 2) throw std::runtime_error("need at least 2 section images");
    const Config cfg = ccli.resolve();
    std::vector<ScalarImage> slices;
    slices.reserve(image_paths.size());
    for (const std::string& p : image_paths) slices.push_back(load_image(p));
    const SequenceResult seq = register_sequence(slices, cfg);
    export_volume(slices, seq, cfg, out_dir);
    for (const PairResult& pr : seq.pairs) print_pair_line(pr);
    int unchained = 0;
    for (const bool c : seq.chained)
        if (!c) ++unchained;
    std::printf("reference section %d; %zu sections, %d not chained\n", seq.reference_index,
                slices.size(), unchained);
    return seq.complete() ? 0 : 2;
}

int run_warp(const std::string& image_path, const std::string& transform_path,
             const std::string& field_path, const std::string& out_path, int width, int height,
             double fill, bool legacy) {
    const ScalarImage img = load_image(image_path);
    const PairTransform t = read_transform(transform_path);
    BSplineField field;
    const BSplineField* field_ptr = nullptr;
    if (!field_path.empty()) {
        field = read_field(field_path);
        field_ptr = &field;
    }
    const int w = width > 0 ? width : img.width;
    const int h = height > 0 ? height : img.height;
    ScalarImage out;
    if (legacy) {
        out = warp(img, AffineMap(invert(t.affine)), w, h, fill);
        if (field_ptr) out = warp(out, BSplineMap(*field_ptr), w, h, fill);
    } else {
        out = warp(img, *stored_pair_map(t, field_ptr), w, h, fill);
    }
    save_png(out, out_path);
    return 0;
}

int run_evaluate(const std::string& run_dir, const std::string& landmarks_dir,
                 double pixel_size_um) {
    const MetricsSummary s = evaluate_run(run_dir, landmarks_dir, pixel_size_um);
    std::printf("pairs evaluated: %d\n", s.pair_count);
    std::printf("AMrTRE:     %.6g\n", s.am_rtre);
    std::printf("MMrTRE:     %.6g\n", s.mm_rtre);
    std::printf("AMean_rTRE: %.6g\n", s.amean_rtre);
    std::printf("AMxrTRE:    %.6g\n", s.amx_rtre);
    std::printf("R_avg:      %.6g\n", s.r_avg);
    std::printf("AMean_D:    %.6g px (%.6g um)\n", s.amean_d_px, s.amean_d_um);
    return 0;
}

int run_synth(const std::string& out_dir, const SynthConfig& scfg) {
    const SynthSequence seq = generate_sequence(scfg);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    for (int s = 0; s < static_cast<int>(seq.slices.size()); ++s) {
        save_png(seq.slices[s].image, (dir / (slice_stem(s) + ".png")).string());
        write_landmarks_csv(seq.slices[s].landmarks, (dir / (slice_stem(s) + ".csv")).string());
    }
    std::ostringstream os;
    os << "{\n";
    os << "  \"width\": " << scfg.width << ",\n  \"height\": " << scfg.height << ",\n";
    os << "  \"count\": " << scfg.count << ",\n  \"seed\": " << scfg.seed << ",\n";
    os << "  \"landmark_grid\": " << scfg.landmark_grid << ",\n";
    os << "  \"texture_scale_px\": " << fmt_double(scfg.texture_scale_px) << ",\n";
    os << "  \"max_rotation_deg\": " << fmt_double(scfg.max_rotation_deg) << ",\n";
    os << "  \"max_translation_px\": " << fmt_double(scfg.max_translation_px) << ",\n";
    os << "  \"max_log_scale\": " << fmt_double(scfg.max_log_scale) << ",\n";
    os << "  \"deform_amplitude_px\": " << fmt_double(scfg.deform_amplitude_px) << ",\n";
    os << "  \"deform_spacing_px\": " << fmt_double(scfg.deform_spacing_px) << ",\n";
    os << "  \"noise_sigma\": " << fmt_double(scfg.noise_sigma) << ",\n";
    os << "  \"drift_gain\": " << fmt_double(scfg.drift_gain) << ",\n";
    os << "  \"tears\": " << scfg.tears << ",\n  \"folds\": " << scfg.folds << ",\n";
    os << "  \"illumination_gain\": " << fmt_double(scfg.illumination_gain) << "\n}\n";
    std::ofstream mf(dir / "synth.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot open for writing: synth.json");
    mf << os.str();
    std::printf("wrote %d synthetic sections to %s\n", scfg.count, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial-section registration: rotation-sweep matching, RANSAC affine, "
                 "B-spline refinement, volume stacking"};
    app.require_subcommand(1);
    int exit_code = 0;

    // register-pair
    auto* rp = app.add_subcommand("register-pair", "register one moving section onto a fixed one");
    std::string rp_fixed, rp_moving, rp_out;
    ConfigCli rp_cfg;
    rp->add_option("--fixed", rp_fixed, "fixed section image")->required();
    rp->add_option("--moving", rp_moving, "moving section image")->required();
    rp->add_option("--out", rp_out, "output directory")->required();
    rp_cfg.attach(rp);
    rp->callback([&]() { exit_code = run_register_pair(rp_fixed, rp_moving, rp_out, rp_cfg); });

    // register-sequence
    auto* rs = app.add_subcommand("register-sequence",
                                  "register a section stack and export the aligned volume");
    std::vector<std::string> rs_images;
    std::string rs_out;
    ConfigCli rs_cfg;
    rs->add_option("--out", rs_out, "output directory")->required();
    rs->add_option("images", rs_images, "section images, in stack order")->required();
    rs_cfg.attach(rs);
    rs->callback([&]() { exit_code = run_register_sequence(rs_images, rs_out, rs_cfg); });

    // warp
    auto* wp = app.add_subcommand("warp", "apply a stored pair transform to an image");
    std::string wp_image, wp_transform, wp_field, wp_out;
    int wp_w = 0, wp_h = 0;
    double wp_fill = 0.0;
    bool wp_legacy = false;
    wp->add_option("--image", wp_image, "image to resample (the moving section)")->required();
    wp->add_option("--transform", wp_transform, "pair transform JSON")->required();
    wp->add_option("--field", wp_field, "displacement field JSON");
    wp->add_option("--out", wp_out, "output PNG")->required();
    wp->add_option("--width", wp_w, "output canvas width (default: input width)");
    wp->add_option("--height", wp_h, "output canvas height (default: input height)");
    wp->add_option("--fill,--fill-value,--fill_value", wp_fill, "out-of-bounds intensity");
    wp->add_flag("--legacy-two-pass,--legacy_two_pass", wp_legacy,
                 "resample per transform stage instead of once");
    wp->callback([&]() {
        exit_code = run_warp(wp_image, wp_transform, wp_field, wp_out, wp_w, wp_h, wp_fill,
                             wp_legacy);
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "landmark metrics for a finished run");
    std::string ev_run, ev_lms;
    double ev_px = 0.0;
    ev->add_option("--run", ev_run, "run directory with manifest.json")->required();
    ev->add_option("--landmarks", ev_lms, "directory with slice_NNN.csv landmark files")
        ->required();
    ev->add_option("--pixel-size-um,--pixel_size_um", ev_px,
                   "physical pixel size (default: from the run config)");
    ev->callback([&]() { exit_code = run_evaluate(ev_run, ev_lms, ev_px); });

    // synth
    auto* sy = app.add_subcommand("synth", "generate a synthetic section stack with landmarks");
    std::string sy_out;
    SynthConfig scfg;
    sy->add_option("--out", sy_out, "output directory")->required();
    sy->add_option("--slices", scfg.count, "number of sections");
    sy->add_option("--width", scfg.width, "section width");
    sy->add_option("--height", scfg.height, "section height");
    sy->add_option("--seed", scfg.seed, "random seed");
    sy->add_option("--landmark-grid,--landmark_grid", scfg.landmark_grid,
                   "landmark lattice side; grid x grid points per section");
    sy->add_option("--texture-scale,--texture_scale", scfg.texture_scale_px,
                   "blob size of the base texture, pixels");
    sy->add_option("--max-rotation,--max_rotation", scfg.max_rotation_deg,
                   "largest per-section rotation, degrees");
    sy->add_option("--max-translation,--max_translation", scfg.max_translation_px,
                   "largest per-section translation, pixels");
    sy->add_option("--max-log-scale,--max_log_scale", scfg.max_log_scale,
                   "isotropic scale jitter, exp(+-value)");
    sy->add_option("--deform-amplitude,--deform_amplitude", scfg.deform_amplitude_px,
                   "non-rigid displacement amplitude, pixels");
    sy->add_option("--deform-spacing,--deform_spacing", scfg.deform_spacing_px,
                   "non-rigid displacement smoothness scale, pixels");
    sy->add_option("--noise", scfg.noise_sigma, "additive Gaussian noise sigma");
    sy->add_option("--drift", scfg.drift_gain, "structural drift gain along the stack");
    sy->add_option("--tears", scfg.tears, "dark tear artifacts per section");
    sy->add_option("--folds", scfg.folds, "contrast-doubling fold bands per section");
    sy->add_option("--illumination", scfg.illumination_gain,
                   "illumination ramp gain g, spanning [1-g, 1+g]");
    sy->callback([&]() { exit_code = run_synth(sy_out, scfg); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return exit_code;
}
