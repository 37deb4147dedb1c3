#include "slicereg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "slicereg/json_io.hpp"

namespace slicereg {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const double r = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw std::runtime_error("expected a number, got '" + v + "'");
    return r;
}

int parse_int(const std::string& v) {
    const double d = parse_double(v);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) throw std::runtime_error("expected an integer, got '" + v + "'");
    return i;
}

uint64_t parse_u64(const std::string& v) {
    const char* begin = v.c_str();
    char* end = nullptr;
    const unsigned long long r = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0')
        throw std::runtime_error("expected an unsigned integer, got '" + v + "'");
    return static_cast<uint64_t>(r);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("expected a boolean, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::runtime_error("empty entry in list '" + v + "'");
        out.push_back(parse_double(item));
    }
    if (out.empty()) throw std::runtime_error("expected a comma-separated list, got '" + v + "'");
    return out;
}

}  // namespace

Config default_config() {
    Config cfg;
    cfg.rotation_angles.push_back(0.0);
    for (int a = 15; a <= 165; a += 15) {
        cfg.rotation_angles.push_back(a);
        cfg.rotation_angles.push_back(-a);
    }
    cfg.rotation_angles.push_back(180.0);
    return cfg;
}

void apply_config_entry(Config& cfg, const std::string& key, const std::string& value) {
    if (key == "detector_k") cfg.detector_k = parse_int(value);
    else if (key == "match_ratio") cfg.match_ratio = parse_double(value);
    else if (key == "rotation_angles") cfg.rotation_angles = parse_list(value);
    else if (key == "ransac_iterations") cfg.ransac_iterations = parse_int(value);
    else if (key == "ransac_threshold") cfg.ransac_threshold = parse_double(value);
    else if (key == "ransac_min_inliers") cfg.ransac_min_inliers = parse_int(value);
    else if (key == "seed") cfg.seed = parse_u64(value);
    else if (key == "bspline_spacing") cfg.bspline_spacing = parse_double(value);
    else if (key == "lambda") cfg.lambda = parse_double(value);
    else if (key == "alpha") cfg.alpha = parse_double(value);
    else if (key == "max_iterations") cfg.max_iterations = parse_int(value);
    else if (key == "epsilon") cfg.epsilon = parse_double(value);
    else if (key == "ncc_window_radius") cfg.ncc_window_radius = parse_int(value);
    else if (key == "sample_stride") cfg.sample_stride = parse_int(value);
    else if (key == "plain_descent") cfg.plain_descent = parse_bool(value);
    else if (key == "reference") {
        if (value != "first" && value != "middle")
            throw std::runtime_error("reference must be 'first' or 'middle'");
        cfg.reference = value;
    } else if (key == "spacing_x") cfg.spacing_x = parse_double(value);
    else if (key == "spacing_y") cfg.spacing_y = parse_double(value);
    else if (key == "spacing_z") cfg.spacing_z = parse_double(value);
    else if (key == "fill_value") cfg.fill_value = parse_double(value);
    else if (key == "workers") {
        cfg.workers = parse_int(value);
        if (cfg.workers < 1) throw std::runtime_error("workers must be >= 1");
    } else if (key == "legacy_two_pass") cfg.legacy_two_pass = parse_bool(value);
    else if (key == "store_warped") cfg.store_warped = parse_bool(value);
    else if (key == "matches_dir") cfg.matches_dir = value;
    else if (key == "pixel_size_um") cfg.pixel_size_um = parse_double(value);
    else throw std::runtime_error("unknown key '" + key + "'");
}

Config load_config_file(const std::string& path, const Config& base) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    Config cfg = base;
    std::string line;
    int ln = 0;
    while (std::getline(is, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": empty key");
        try {
            apply_config_entry(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": " + e.what());
        }
    }
    return cfg;
}

std::string config_to_json(const Config& cfg, const std::string& indent) {
    std::ostringstream os;
    const std::string& in = indent;
    os << "{\n";
    os << in << "  \"detector_k\": " << cfg.detector_k << ",\n";
    os << in << "  \"match_ratio\": " << fmt_double(cfg.match_ratio) << ",\n";
    os << in << "  \"rotation_angles\": [";
    for (size_t i = 0; i < cfg.rotation_angles.size(); ++i) {
        if (i) os << ", ";
        os << fmt_double(cfg.rotation_angles[i]);
    }
    os << "],\n";
    os << in << "  \"ransac_iterations\": " << cfg.ransac_iterations << ",\n";
    os << in << "  \"ransac_threshold\": " << fmt_double(cfg.ransac_threshold) << ",\n";
    os << in << "  \"ransac_min_inliers\": " << cfg.ransac_min_inliers << ",\n";
    os << in << "  \"seed\": " << cfg.seed << ",\n";
    os << in << "  \"bspline_spacing\": " << fmt_double(cfg.bspline_spacing) << ",\n";
    os << in << "  \"lambda\": " << fmt_double(cfg.lambda) << ",\n";
    os << in << "  \"alpha\": " << fmt_double(cfg.alpha) << ",\n";
    os << in << "  \"max_iterations\": " << cfg.max_iterations << ",\n";
    os << in << "  \"epsilon\": " << fmt_double(cfg.epsilon) << ",\n";
    os << in << "  \"ncc_window_radius\": " << cfg.ncc_window_radius << ",\n";
    os << in << "  \"sample_stride\": " << cfg.sample_stride << ",\n";
    os << in << "  \"plain_descent\": " << (cfg.plain_descent ? "true" : "false") << ",\n";
    os << in << "  \"reference\": \"" << json_escape(cfg.reference) << "\",\n";
    os << in << "  \"spacing_x\": " << fmt_double(cfg.spacing_x) << ",\n";
    os << in << "  \"spacing_y\": " << fmt_double(cfg.spacing_y) << ",\n";
    os << in << "  \"spacing_z\": " << fmt_double(cfg.spacing_z) << ",\n";
    os << in << "  \"fill_value\": " << fmt_double(cfg.fill_value) << ",\n";
    os << in << "  \"legacy_two_pass\": " << (cfg.legacy_two_pass ? "true" : "false") << ",\n";
    os << in << "  \"store_warped\": " << (cfg.store_warped ? "true" : "false") << ",\n";
    os << in << "  \"matches_dir\": \"" << json_escape(cfg.matches_dir) << "\",\n";
    os << in << "  \"pixel_size_um\": " << fmt_double(cfg.pixel_size_um) << "\n";
    os << in << "}";
    return os.str();
}

}  // namespace slicereg
