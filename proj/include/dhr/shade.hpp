#pragma once

#include <cstdint>
#include <vector>

#include "dhr/image.hpp"
#include "dhr/math.hpp"
#include "dhr/raster.hpp"
#include "dhr/scene.hpp"
#include "dhr/visibility.hpp"

namespace dhr {

// I = (albedo / pi) * sum_i k_i * saturate(N.L_i) * intensity_i, componentwise.
// Point lights: L_i = normalize(pos_i - world_pos), no distance falloff.
// Directional: L_i = -direction_i. Bit i of `k` gates light i.
Vec3 shade_pixel(Vec3 albedo, Vec3 normal, Vec3 world_pos, uint64_t k,
                 const std::vector<Light>& lights);

// round(255 * clamp(c, 0, 1)), half away from zero, no gamma.
uint8_t quantize_channel(float c);

// Valid pixels get shade_pixel with that pixel's visibility bits; empty
// pixels get the background color. Throws on dimension/light-count mismatch.
ImageRgb8 shade(const GBuffer& g, const VisibilityBitmap& vis, const std::vector<Light>& lights,
                Vec3 background);
ImageRgb8 shade_serial(const GBuffer& g, const VisibilityBitmap& vis,
                       const std::vector<Light>& lights, Vec3 background);

}  // namespace dhr
