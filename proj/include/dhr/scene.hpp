#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dhr/math.hpp"

namespace dhr {

constexpr int kMaxLights = 64;

struct Material {
    Vec3 diffuse;  // linear RGB, each channel in [0,1]

    friend bool operator==(const Material&, const Material&) = default;
};

struct Triangle {
    Vec3 v0, v1, v2;   // world-space positions, counter-clockwise front face
    Vec3 n0, n1, n2;   // unit vertex normals
    uint32_t material_index = 0;

    friend bool operator==(const Triangle&, const Triangle&) = default;
};

enum class LightKind : uint8_t { point = 0, directional = 1 };

struct Light {
    LightKind kind = LightKind::point;
    Vec3 position;    // point lights only
    Vec3 direction;   // directional only; unit, pointing from the light toward the scene
    Vec3 intensity;   // linear RGB, nonnegative

    friend bool operator==(const Light&, const Light&) = default;
};

struct Camera {
    Vec3 position;
    Quat orientation;          // rotates camera-local axes into world space; forward is -Z
    float vfov_deg = 60.0f;    // vertical field of view, (0, 180)
    float near_clip = 0.05f;

    friend bool operator==(const Camera&, const Camera&) = default;
};

struct Scene {
    std::vector<Triangle> triangles;
    std::vector<Material> materials;
    std::vector<Light> lights;
    Camera default_camera;
    Vec3 background;  // linear RGB fill for pixels with no geometry

    friend bool operator==(const Scene&, const Scene&) = default;
};

// One scripted camera update; stands in for live input.
struct FrameInput {
    uint32_t frame_id = 0;
    Camera camera;           // near_clip is a session constant taken from the scene camera
    uint64_t timestamp_us = 0;

    friend bool operator==(const FrameInput&, const FrameInput&) = default;
};

class ParseError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parses and validates a .scene.json document. Values are parsed as IEEE-754
// doubles and narrowed to f32; directions are renormalized in double
// precision before narrowing. Missing vertex normals get the face normal.
Scene load_scene(const std::string& text);

std::string serialize_scene(const Scene& scene);

// Parses a .trace.jsonl camera trace, one frame per line, frame ids strictly
// increasing. Quaternions off unit length by more than 1e-3 are rejected.
std::vector<FrameInput> load_trace(const std::string& text);

std::string serialize_trace(const std::vector<FrameInput>& trace);

// Canonical little-endian serialization of every scene field, in declaration
// order with u32 list-length prefixes. Input to scene_hash.
std::vector<uint8_t> canonical_scene_bytes(const Scene& scene);

// FNV-1a 64 over canonical_scene_bytes; used for client/server session validation.
uint64_t scene_hash(const Scene& scene);

Aabb scene_bounds(const Scene& scene);

}  // namespace dhr
