#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slicereg {

/// Tunables for the whole registration pipeline. Defaults follow the CLI
/// documentation; a flat `key = value` file can override any of them.
struct Config {
    // keypoints and matching
    int detector_k = 4096;
    double match_ratio = 0.9;
    std::vector<double> rotation_angles;  // candidate section rotations, degrees

    // robust affine estimation
    int ransac_iterations = 2000;
    double ransac_threshold = 3.0;
    int ransac_min_inliers = 8;
    uint64_t seed = 1;

    // non-rigid refinement
    double bspline_spacing = 32.0;
    double lambda = 1.0;
    double alpha = 0.5;
    int max_iterations = 300;
    double epsilon = 1e-6;
    int ncc_window_radius = 7;
    int sample_stride = 2;
    bool plain_descent = false;

    // sequence assembly
    std::string reference = "first";  // or "middle"
    double spacing_x = 1.0;
    double spacing_y = 1.0;
    double spacing_z = 8.0;
    double fill_value = 0.0;
    int workers = 1;
    bool legacy_two_pass = false;
    bool store_warped = false;
    std::string matches_dir;  // read pre-computed match files instead of detecting

    // evaluation
    double pixel_size_um = 0.25;
};

/// Defaults, including the 24-angle rotation grid (0, +-15, ..., +-165, 180).
Config default_config();

/// Apply one `key = value` entry; throws on unknown keys or unparsable values.
void apply_config_entry(Config& cfg, const std::string& key, const std::string& value);

/// Parse a flat config file onto `base`. Lines are `key = value`; blank lines
/// and `#` comments are ignored. Errors carry the 1-based line number.
Config load_config_file(const std::string& path, const Config& base);

/// JSON object echoing the effective configuration. The worker count is
/// deliberately omitted: results are independent of it, and run artifacts
/// produced under different thread counts must compare equal.
std::string config_to_json(const Config& cfg, const std::string& indent);

}  // namespace slicereg
