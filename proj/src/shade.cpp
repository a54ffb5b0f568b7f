#include "dhr/shade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dhr {
namespace {

constexpr double kInvPi = 0.3183098861837906715377675267450287;

void shade_row(const GBuffer& g, const VisibilityBitmap& vis, const std::vector<Light>& lights,
               Vec3 background, ImageRgb8& img, uint16_t y) {
    for (uint16_t x = 0; x < g.width; ++x) {
        const size_t p = g.index(x, y);
        Vec3 c;
        if (g.valid[p])
            c = shade_pixel(g.albedo[p], g.normal[p], g.world_pos[p],
                            vis.pixel_mask(uint32_t(p)), lights);
        else
            c = background;
        img.pixels[p * 3 + 0] = quantize_channel(c.x);
        img.pixels[p * 3 + 1] = quantize_channel(c.y);
        img.pixels[p * 3 + 2] = quantize_channel(c.z);
    }
}

ImageRgb8 shade_impl(const GBuffer& g, const VisibilityBitmap& vis,
                     const std::vector<Light>& lights, Vec3 background, bool parallel) {
    if (vis.width != g.width || vis.height != g.height)
        throw std::invalid_argument("gbuffer/bitmap dimension mismatch");
    if (vis.n_lights != lights.size()) throw std::invalid_argument("light count mismatch");

    ImageRgb8 img = make_image(g.width, g.height);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < int(g.height); ++y)
            shade_row(g, vis, lights, background, img, uint16_t(y));
    } else {
        for (uint16_t y = 0; y < g.height; ++y) shade_row(g, vis, lights, background, img, y);
    }
    return img;
}

}  // namespace

Vec3 shade_pixel(Vec3 albedo, Vec3 normal, Vec3 world_pos, uint64_t k,
                 const std::vector<Light>& lights) {
    // Accumulate in double so the result is insensitive to light order at
    // the 1/255 quantization granularity.
    double sum[3] = {0.0, 0.0, 0.0};
    const double nx = normal.x, ny = normal.y, nz = normal.z;
    for (size_t i = 0; i < lights.size(); ++i) {
        if (!((k >> i) & 1)) continue;
        const Light& light = lights[i];
        double lx, ly, lz;
        if (light.kind == LightKind::point) {
            lx = double(light.position.x) - double(world_pos.x);
            ly = double(light.position.y) - double(world_pos.y);
            lz = double(light.position.z) - double(world_pos.z);
            const double len = std::sqrt(lx * lx + ly * ly + lz * lz);
            if (len == 0.0) continue;  // light coincides with the surface point
            lx /= len;
            ly /= len;
            lz /= len;
        } else {
            lx = -double(light.direction.x);
            ly = -double(light.direction.y);
            lz = -double(light.direction.z);
        }
        double ndotl = nx * lx + ny * ly + nz * lz;
        if (ndotl <= 0.0) continue;  // saturate
        if (ndotl > 1.0) ndotl = 1.0;
        sum[0] += ndotl * double(light.intensity.x);
        sum[1] += ndotl * double(light.intensity.y);
        sum[2] += ndotl * double(light.intensity.z);
    }
    return Vec3{float(double(albedo.x) * kInvPi * sum[0]),
                float(double(albedo.y) * kInvPi * sum[1]),
                float(double(albedo.z) * kInvPi * sum[2])};
}

uint8_t quantize_channel(float c) {
    const double v = std::clamp(double(c), 0.0, 1.0);
    return uint8_t(std::lround(255.0 * v));
}

ImageRgb8 shade(const GBuffer& g, const VisibilityBitmap& vis, const std::vector<Light>& lights,
                Vec3 background) {
    return shade_impl(g, vis, lights, background, true);
}

ImageRgb8 shade_serial(const GBuffer& g, const VisibilityBitmap& vis,
                       const std::vector<Light>& lights, Vec3 background) {
    return shade_impl(g, vis, lights, background, false);
}

}  // namespace dhr
