#include "slicereg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "slicereg/json_io.hpp"

namespace slicereg {

namespace {

double parse_num(const std::string& field, const std::string& path, int line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    while (end && (*end == ' ' || *end == '\t')) ++end;
    if (end == begin || (end && *end != '\0') || !std::isfinite(v))
        throw std::runtime_error(path + ":" + std::to_string(line) + ": invalid number '" + field +
                                 "'");
    return v;
}

}  // namespace

LandmarkSet read_landmarks_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);

    LandmarkSet out;
    std::set<int> ids;
    std::string line;
    int ln = 0;
    while (std::getline(is, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') continue;
        if (line.compare(first, 11, "landmark_id") == 0) continue;  // header

        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(ln) +
                                     ": expected 3 comma-separated values");
        const double idv = parse_num(fields[0], path, ln);
        const int id = static_cast<int>(idv);
        if (static_cast<double>(id) != idv)
            throw std::runtime_error(path + ":" + std::to_string(ln) +
                                     ": landmark id must be an integer");
        if (!ids.insert(id).second)
            throw std::runtime_error(path + ":" + std::to_string(ln) + ": duplicate landmark id " +
                                     std::to_string(id));
        Landmark lm;
        lm.id = id;
        lm.p.x = parse_num(fields[1], path, ln);
        lm.p.y = parse_num(fields[2], path, ln);
        out.points.push_back(lm);
    }
    return out;
}

void write_landmarks_csv(const LandmarkSet& lms, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "landmark_id,x,y\n";
    for (const Landmark& lm : lms.points)
        os << lm.id << ',' << fmt_double(lm.p.x) << ',' << fmt_double(lm.p.y) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty set");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PairEvaluation evaluate_pair(const LandmarkSet& fixed_lms, const LandmarkSet& moving_lms,
                             const CoordinateMap& fixed_to_moving, int width, int height) {
    std::unordered_map<int, Vec2> moving_by_id;
    for (const Landmark& lm : moving_lms.points) moving_by_id[lm.id] = lm.p;

    const double diag = std::sqrt(static_cast<double>(width) * width +
                                  static_cast<double>(height) * height);
    std::vector<double> rtre;
    double dist_sum = 0.0;
    int improved = 0;
    for (const Landmark& lm : fixed_lms.points) {
        const auto it = moving_by_id.find(lm.id);
        if (it == moving_by_id.end()) continue;
        const Vec2 mapped = fixed_to_moving.map(lm.p);
        const double err = norm(mapped - it->second);
        const double init = norm(lm.p - it->second);
        rtre.push_back(err / diag);
        dist_sum += err;
        if (err / diag < init / diag) ++improved;
    }
    if (rtre.empty()) throw std::runtime_error("no common landmarks between sections");

    PairEvaluation ev;
    ev.landmark_count = static_cast<int>(rtre.size());
    ev.median_rtre = median(rtre);
    double sum = 0.0, mx = 0.0;
    for (double r : rtre) {
        sum += r;
        mx = std::max(mx, r);
    }
    ev.mean_rtre = sum / rtre.size();
    ev.max_rtre = mx;
    ev.robustness = static_cast<double>(improved) / rtre.size();
    ev.mean_dist_px = dist_sum / rtre.size();
    return ev;
}

MetricsSummary aggregate(const std::vector<PairEvaluation>& pairs, double pixel_size_um) {
    if (pairs.empty()) throw std::invalid_argument("no pair evaluations to aggregate");
    MetricsSummary s;
    s.pair_count = static_cast<int>(pairs.size());
    std::vector<double> medians;
    for (const PairEvaluation& p : pairs) {
        medians.push_back(p.median_rtre);
        s.am_rtre += p.median_rtre;
        s.amean_rtre += p.mean_rtre;
        s.amx_rtre += p.max_rtre;
        s.r_avg += p.robustness;
        s.amean_d_px += p.mean_dist_px;
    }
    const double n = static_cast<double>(pairs.size());
    s.am_rtre /= n;
    s.amean_rtre /= n;
    s.amx_rtre /= n;
    s.r_avg /= n;
    s.amean_d_px /= n;
    s.mm_rtre = median(medians);
    s.amean_d_um = s.amean_d_px * pixel_size_um;
    return s;
}

std::string metrics_to_json(const std::vector<PairEvaluation>& pairs, const MetricsSummary& summary,
                            double pixel_size_um) {
    std::ostringstream os;
    os << "{\n  \"pixel_size_um\": " << fmt_double(pixel_size_um) << ",\n  \"pairs\": [\n";
    for (size_t i = 0; i < pairs.size(); ++i) {
        const PairEvaluation& p = pairs[i];
        os << "    {\"fixed_index\": " << p.fixed_index << ", \"moving_index\": " << p.moving_index
           << ", \"landmark_count\": " << p.landmark_count << ", \"median_rtre\": "
           << fmt_double(p.median_rtre) << ", \"mean_rtre\": " << fmt_double(p.mean_rtre)
           << ", \"max_rtre\": " << fmt_double(p.max_rtre) << ", \"robustness\": "
           << fmt_double(p.robustness) << ", \"mean_dist_px\": " << fmt_double(p.mean_dist_px)
           << ", \"mean_dist_um\": " << fmt_double(p.mean_dist_px * pixel_size_um) << "}"
           << (i + 1 < pairs.size() ? "," : "") << "\n";
    }
    os << "  ],\n  \"summary\": {\n";
    os << "    \"AMrTRE\": " << fmt_double(summary.am_rtre) << ",\n";
    os << "    \"MMrTRE\": " << fmt_double(summary.mm_rtre) << ",\n";
    os << "    \"AMean_rTRE\": " << fmt_double(summary.amean_rtre) << ",\n";
    os << "    \"AMean_rTRE_note\": \"definition inferred: mean over pairs of per-pair mean\",\n";
    os << "    \"AMxrTRE\": " << fmt_double(summary.amx_rtre) << ",\n";
    os << "    \"R_avg\": " << fmt_double(summary.r_avg) << ",\n";
    os << "    \"AMean_D_px\": " << fmt_double(summary.amean_d_px) << ",\n";
    os << "    \"AMean_D_um\": " << fmt_double(summary.amean_d_um) << ",\n";
    os << "    \"pair_count\": " << summary.pair_count << "\n  }\n}\n";
    return os.str();
}

void write_metrics_json(const std::vector<PairEvaluation>& pairs, const MetricsSummary& summary,
                        double pixel_size_um, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << metrics_to_json(pairs, summary, pixel_size_um);
    if (!os) throw std::runtime_error("write failed: " + path);
}

void write_pair_metrics_csv(const std::vector<PairEvaluation>& pairs, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "fixed_index,moving_index,landmark_count,median_rtre,mean_rtre,max_rtre,robustness,"
          "mean_dist_px\n";
    for (const PairEvaluation& p : pairs) {
        os << p.fixed_index << ',' << p.moving_index << ',' << p.landmark_count << ','
           << fmt_double(p.median_rtre) << ',' << fmt_double(p.mean_rtre) << ','
           << fmt_double(p.max_rtre) << ',' << fmt_double(p.robustness) << ','
           << fmt_double(p.mean_dist_px) << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace slicereg
