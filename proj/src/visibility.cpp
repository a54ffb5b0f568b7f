#include "dhr/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dhr {
namespace {

// One byte of one plane = 8 consecutive pixels of one light. Computing whole
// bytes keeps the parallel path free of sub-byte write sharing, so the
// result is bit-identical no matter how the loop is scheduled.
uint8_t visibility_byte(const Bvh& bvh, const GBuffer& g, const Light& light, float epsilon,
                        size_t byte_index) {
    const size_t pixel_count = g.pixel_count();
    uint8_t out = 0;
    for (unsigned bit = 0; bit < 8; ++bit) {
        const size_t pixel = byte_index * 8 + bit;
        if (pixel >= pixel_count) break;
        if (!g.valid[pixel]) continue;
        const Vec3 origin = g.world_pos[pixel] + g.normal[pixel] * epsilon;
        Vec3 dir;
        float t_max;
        if (light.kind == LightKind::point) {
            const Vec3 to_light = light.position - origin;
            t_max = length(to_light);
            if (t_max <= 0.0f) {  // light exactly at the origin: nothing between
                out |= uint8_t(1u << bit);
                continue;
            }
            dir = to_light * (1.0f / t_max);
        } else {
            dir = Vec3{-light.direction.x, -light.direction.y, -light.direction.z};
            t_max = std::numeric_limits<float>::infinity();
        }
        if (!occluded(bvh, origin, dir, t_max)) out |= uint8_t(1u << bit);
    }
    return out;
}

VisibilityBitmap trace_impl(const Bvh& bvh, const GBuffer& g, const std::vector<Light>& lights,
                            float epsilon, uint32_t frame_id, bool parallel) {
    if (lights.empty() || lights.size() > kMaxLights)
        throw std::invalid_argument("light count out of range");
    if (!(epsilon > 0.0f)) throw std::invalid_argument("epsilon must be positive");

    VisibilityBitmap vis = make_bitmap(g.width, g.height, uint8_t(lights.size()), frame_id);
    const size_t pb = vis.plane_bytes();
    const size_t total = pb * lights.size();

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < (long long)total; ++i)
            vis.planes[size_t(i)] = visibility_byte(bvh, g, lights[size_t(i) / pb], epsilon,
                                                    size_t(i) % pb);
    } else {
        for (size_t i = 0; i < total; ++i)
            vis.planes[i] = visibility_byte(bvh, g, lights[i / pb], epsilon, i % pb);
    }
    return vis;
}

}  // namespace

VisibilityBitmap make_bitmap(uint16_t width, uint16_t height, uint8_t n_lights,
                             uint32_t frame_id) {
    VisibilityBitmap vis;
    vis.width = width;
    vis.height = height;
    vis.n_lights = n_lights;
    vis.frame_id = frame_id;
    vis.planes.assign(vis.plane_bytes() * n_lights, 0);
    return vis;
}

VisibilityBitmap all_visible_bitmap(uint16_t width, uint16_t height, uint8_t n_lights,
                                    uint32_t frame_id) {
    VisibilityBitmap vis = make_bitmap(width, height, n_lights, frame_id);
    const size_t pixels = size_t(width) * height;
    const size_t pb = vis.plane_bytes();
    if (pb == 0) return vis;
    const unsigned tail_bits = unsigned(pixels & 7);
    const uint8_t tail = tail_bits == 0 ? 0xFF : uint8_t((1u << tail_bits) - 1);
    for (uint32_t i = 0; i < n_lights; ++i) {
        std::fill_n(vis.planes.begin() + i * pb, pb - 1, uint8_t(0xFF));
        vis.planes[i * pb + pb - 1] = tail;
    }
    return vis;
}

float shadow_epsilon(const Scene& scene) {
    const float diag = length(scene_bounds(scene).diagonal());
    return std::isfinite(diag) && diag > 0.0f ? 1e-4f * diag : 1e-4f;
}

VisibilityBitmap trace_visibility(const Bvh& bvh, const GBuffer& g,
                                  const std::vector<Light>& lights, float epsilon,
                                  uint32_t frame_id) {
    return trace_impl(bvh, g, lights, epsilon, frame_id, true);
}

VisibilityBitmap trace_visibility_serial(const Bvh& bvh, const GBuffer& g,
                                         const std::vector<Light>& lights, float epsilon,
                                         uint32_t frame_id) {
    return trace_impl(bvh, g, lights, epsilon, frame_id, false);
}

}  // namespace dhr
