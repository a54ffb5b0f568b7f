#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "dhr/demo.hpp"
#include "dhr/pipeline.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& f, int reps) {
    f();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-12s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    uint16_t w = 640, h = 480;
    int reps = 5, subdivisions = 3;
    for (int i = 1; i < argc; ++i) {
        if (!std::strcmp(argv[i], "--small")) {
            w = 160;
            h = 120;
            subdivisions = 2;
        } else if (!std::strcmp(argv[i], "--reps") && i + 1 < argc) {
            reps = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: dhr-bench [--small] [--reps N]\n");
            return 2;
        }
    }

    const dhr::Scene scene = dhr::make_sphere_plane_scene(subdivisions);
    const dhr::Camera cam = dhr::session_camera(scene, scene.default_camera);
    const dhr::Bvh bvh = dhr::build_bvh(scene);
    const float eps = dhr::shadow_epsilon(scene);

    std::printf("sphere-plane scene: %zu triangles, %zu lights, %ux%u, %d reps\n",
                scene.triangles.size(), scene.lights.size(), w, h, reps);
    std::printf("%-12s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const dhr::GBuffer g = dhr::rasterize(scene, cam, w, h);
    row("raster", time_ms([&] { dhr::rasterize_serial(scene, cam, w, h); }, reps),
        time_ms([&] { dhr::rasterize(scene, cam, w, h); }, reps));

    const dhr::VisibilityBitmap vis = dhr::trace_visibility(bvh, g, scene.lights, eps);
    row("trace", time_ms([&] { dhr::trace_visibility_serial(bvh, g, scene.lights, eps); }, reps),
        time_ms([&] { dhr::trace_visibility(bvh, g, scene.lights, eps); }, reps));

    row("shade",
        time_ms([&] { dhr::shade_serial(g, vis, scene.lights, scene.background); }, reps),
        time_ms([&] { dhr::shade(g, vis, scene.lights, scene.background); }, reps));

    // Sanity: both variants must agree bit-for-bit, or the numbers are lies.
    const bool same =
        dhr::rasterize_serial(scene, cam, w, h) == g &&
        dhr::trace_visibility_serial(bvh, g, scene.lights, eps) == vis &&
        dhr::shade_serial(g, vis, scene.lights, scene.background) ==
            dhr::shade(g, vis, scene.lights, scene.background);
    std::printf("serial/parallel outputs identical: %s\n", same ? "yes" : "NO");
    return same ? 0 : 1;
}
