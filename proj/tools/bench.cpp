// Timing comparison between the serial reference kernels and the parallel
// production kernels. The two must agree numerically (the test suite checks
// that); this tool reports what the parallel versions buy at a given size.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "slicereg/affine.hpp"
#include "slicereg/bspline.hpp"
#include "slicereg/coordmap.hpp"
#include "slicereg/image.hpp"
#include "slicereg/reference.hpp"
#include "slicereg/rng.hpp"

using namespace slicereg;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(int reps, const std::function<void()>& fn) {
    fn();  // warm-up, also first-touch allocations
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

ScalarImage noise_image(int w, int h, uint64_t seed) {
    ScalarImage img;
    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<size_t>(w) * h);
    Rng rng(seed);
    // smooth-ish content so NCC windows are not all degenerate
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = 0.5 + 0.3 * std::sin(0.07 * x) * std::cos(0.05 * y) +
                           0.1 * (rng.uniform() - 0.5);
    return img;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("  %-18s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial reference vs parallel kernel timings"};
    int size = 512;
    int reps = 3;
    int threads = 0;
    app.add_option("--size", size, "image side length")->check(CLI::Range(64, 8192));
    app.add_option("--reps", reps, "repetitions per kernel")->check(CLI::Range(1, 100));
    app.add_option("--threads", threads, "worker threads (0 = library default)");
    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
    int used = 1;
#pragma omp parallel
    {
#pragma omp single
        used = omp_get_num_threads();
    }
    std::printf("OpenMP enabled, %d thread(s)\n", used);
#else
    std::printf("built without OpenMP; both columns run serially\n");
#endif

    const ScalarImage fixed = noise_image(size, size, 7);
    const ScalarImage moving = noise_image(size, size, 8);
    BSplineField field = make_field_covering(size, size, 32.0);
    Rng frng(9);
    for (double& c : field.coeffs) c = 2.0 * (frng.uniform() - 0.5);
    OptimizerConfig ocfg;
    const AffineTransform2D small_rot =
        AffineTransform2D::rotation_about(3.0, {size / 2.0, size / 2.0}, {size / 2.0, size / 2.0});
    const AffineMap amap(small_rot);

    std::printf("image %dx%d, field %dx%d control points, %d rep(s)\n", size, size, field.nx,
                field.ny, reps);
    std::printf("  %-18s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    report("warp/affine",
           time_ms(reps, [&] { warp_reference(moving, amap, size, size); }),
           time_ms(reps, [&] { warp(moving, amap, size, size); }));

    report("loss+gradient",
           time_ms(reps,
                   [&] {
                       std::vector<double> g;
                       loss_and_gradient_reference(fixed, moving, field, ocfg, &g);
                   }),
           time_ms(reps, [&] {
               std::vector<double> g;
               loss_and_gradient(fixed, moving, field, ocfg, &g);
           }));

    // synthetic match set: 600 inliers of a known affine plus 200 outliers
    MatchSet ms;
    ms.fixed_width = ms.moving_width = size;
    ms.fixed_height = ms.moving_height = size;
    Rng mrng(10);
    const AffineTransform2D truth{0.98, -0.12, 0.12, 0.98, 14.0, -9.0};
    for (int i = 0; i < 800; ++i) {
        Vec2 q{mrng.uniform(0.0, size - 1.0), mrng.uniform(0.0, size - 1.0)};
        Vec2 p = i < 600 ? apply(truth, q)
                         : Vec2{mrng.uniform(0.0, size - 1.0), mrng.uniform(0.0, size - 1.0)};
        ms.pairs.push_back({p, q, 1.0});
    }
    RansacConfig rcfg;
    report("ransac/800 matches",
           time_ms(reps, [&] { ransac_affine_reference(ms, rcfg); }),
           time_ms(reps, [&] { ransac_affine(ms, rcfg); }));

    return 0;
}
