#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace dhr {

struct Vec3 {
    float x = 0.0f, y = 0.0f, z = 0.0f;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, float s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(float s, Vec3 a) { return a * s; }
    friend Vec3 operator*(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
    friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
    Vec3& operator+=(Vec3 b) { x += b.x; y += b.y; z += b.z; return *this; }
    friend bool operator==(Vec3 a, Vec3 b) { return a.x == b.x && a.y == b.y && a.z == b.z; }
};

inline float dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline float length(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalize(Vec3 a) { return a * (1.0f / length(a)); }
inline Vec3 vmin(Vec3 a, Vec3 b) { return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)}; }
inline Vec3 vmax(Vec3 a, Vec3 b) { return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}; }
inline bool all_finite(Vec3 a) { return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z); }

// Rotation quaternion, (x,y,z,w) with w the scalar part.
struct Quat {
    float x = 0.0f, y = 0.0f, z = 0.0f, w = 1.0f;

    friend bool operator==(Quat a, Quat b) {
        return a.x == b.x && a.y == b.y && a.z == b.z && a.w == b.w;
    }
};

inline float norm(Quat q) { return std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z + q.w * q.w); }
inline Quat conjugate(Quat q) { return {-q.x, -q.y, -q.z, q.w}; }

// Applies the rotation q to v (local -> world for camera orientations).
inline Vec3 rotate(Quat q, Vec3 v) {
    const Vec3 u{q.x, q.y, q.z};
    const Vec3 t = cross(u, v) * 2.0f;
    return v + t * q.w + cross(u, t);
}

struct Aabb {
    Vec3 min{+INFINITY, +INFINITY, +INFINITY};
    Vec3 max{-INFINITY, -INFINITY, -INFINITY};

    void extend(Vec3 p) { min = vmin(min, p); max = vmax(max, p); }
    void extend(const Aabb& b) { min = vmin(min, b.min); max = vmax(max, b.max); }
    bool empty() const { return min.x > max.x; }
    Vec3 diagonal() const { return max - min; }
};

inline float saturate(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace dhr
