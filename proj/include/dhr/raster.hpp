#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dhr/scene.hpp"

namespace dhr {

// Deferred-shading inputs: the client reads normal/albedo, the server reads
// world_pos; both read valid. depth is view-space distance along the camera
// forward axis, +inf where no geometry.
struct GBuffer {
    uint16_t width = 0, height = 0;
    std::vector<Vec3> world_pos;
    std::vector<Vec3> normal;
    std::vector<Vec3> albedo;
    std::vector<float> depth;
    std::vector<uint8_t> valid;

    size_t pixel_count() const { return size_t(width) * height; }
    size_t index(int x, int y) const { return size_t(y) * width + x; }

    friend bool operator==(const GBuffer&, const GBuffer&) = default;
};

struct ProjectedVertex {
    float screen_x = 0.0f;   // pixel units, pixel centers at integer + 0.5
    float screen_y = 0.0f;   // row 0 is the top of the image
    float view_depth = 0.0f; // distance along the camera forward axis
};

// Pinhole projection with square pixels and a vertical field of view.
// Returns nullopt (the behind-near marker) when view_depth < near.
std::optional<ProjectedVertex> project_vertex(const Camera& camera, uint16_t width, uint16_t height,
                                              Vec3 p);

// Edge-function rasterization with the top-left fill rule, near-plane
// clipping, perspective-correct attributes, and no back-face culling.
// Output is bit-identical between the parallel and serial variants.
GBuffer rasterize(const Scene& scene, const Camera& camera, uint16_t width, uint16_t height);
GBuffer rasterize_serial(const Scene& scene, const Camera& camera, uint16_t width, uint16_t height);

}  // namespace dhr
