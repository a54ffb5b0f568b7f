#pragma once

#include <cstdint>
#include <vector>

#include "dhr/math.hpp"
#include "dhr/scene.hpp"

namespace dhr {

// The default experiment: an icosphere (radius 0.8, centered at (0,1.2,0))
// over a ground quad, lit by a point light overhead, an oblique point light,
// and a directional fill.
Scene make_sphere_plane_scene(int subdivisions = 2);

// Camera circling the sphere at fixed height, always aimed at it.
std::vector<FrameInput> make_orbit_trace(uint32_t frames = 60, float vfov_deg = 60.0f);

// Orientation whose local -Z axis points from eye toward target.
Quat look_at_quat(Vec3 eye, Vec3 target, Vec3 up);

}  // namespace dhr
