#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dhr/bvh.hpp"
#include "dhr/raster.hpp"
#include "dhr/scene.hpp"

namespace dhr {

// One bit per (pixel, light): 1 = the light is unoccluded from the pixel's
// surface point. Stored as one bit-plane per light (planes compress far
// better than interleaved per-pixel masks). Planes are contiguous and
// light-major, so the wire payload is the `planes` vector verbatim.
struct VisibilityBitmap {
    uint16_t width = 0;
    uint16_t height = 0;
    uint8_t n_lights = 0;
    uint32_t frame_id = 0;
    std::vector<uint8_t> planes;  // n_lights * plane_bytes(), row-major, LSB-first

    size_t plane_bytes() const { return (size_t(width) * height + 7) / 8; }

    bool get(uint32_t light, uint32_t pixel) const {
        return (planes[size_t(light) * plane_bytes() + (pixel >> 3)] >> (pixel & 7)) & 1;
    }
    void set(uint32_t light, uint32_t pixel, bool visible) {
        uint8_t& b = planes[size_t(light) * plane_bytes() + (pixel >> 3)];
        const uint8_t mask = uint8_t(1u << (pixel & 7));
        b = visible ? uint8_t(b | mask) : uint8_t(b & ~mask);
    }
    // All lights' bits for one pixel, light i in bit i.
    uint64_t pixel_mask(uint32_t pixel) const {
        uint64_t m = 0;
        const size_t pb = plane_bytes();
        const size_t byte = pixel >> 3;
        const unsigned shift = pixel & 7;
        for (uint32_t i = 0; i < n_lights; ++i)
            m |= uint64_t((planes[i * pb + byte] >> shift) & 1) << i;
        return m;
    }

    bool operator==(const VisibilityBitmap&) const = default;
};

VisibilityBitmap make_bitmap(uint16_t width, uint16_t height, uint8_t n_lights,
                             uint32_t frame_id);

// Cold-start fallback: every (valid-pixel, light) pair lit. Padding bits in
// the final byte of each plane stay 0.
VisibilityBitmap all_visible_bitmap(uint16_t width, uint16_t height, uint8_t n_lights,
                                    uint32_t frame_id);

// Shadow-ray origin offset: 1e-4 x scene AABB diagonal.
float shadow_epsilon(const Scene& scene);

VisibilityBitmap trace_visibility(const Bvh& bvh, const GBuffer& g,
                                  const std::vector<Light>& lights, float epsilon,
                                  uint32_t frame_id = 0);
VisibilityBitmap trace_visibility_serial(const Bvh& bvh, const GBuffer& g,
                                         const std::vector<Light>& lights, float epsilon,
                                         uint32_t frame_id = 0);

}  // namespace dhr
