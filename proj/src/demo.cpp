#include "dhr/demo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <utility>

namespace dhr {
namespace {

struct V3d {
    double x, y, z;
};

V3d norm3(V3d v) {
    const double len = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / len, v.y / len, v.z / len};
}

struct IcoMesh {
    std::vector<V3d> verts;  // on the unit sphere
    std::vector<std::array<uint32_t, 3>> faces;
};

IcoMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    IcoMesh m;
    const double raw[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                               {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                               {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (const auto& v : raw) m.verts.push_back(norm3({v[0], v[1], v[2]}));
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
               {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
               {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
               {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    return m;
}

void subdivide(IcoMesh& m) {
    std::map<std::pair<uint32_t, uint32_t>, uint32_t> midpoint;
    auto mid = [&](uint32_t a, uint32_t b) {
        const auto key = std::minmax(a, b);
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const V3d& va = m.verts[a];
        const V3d& vb = m.verts[b];
        m.verts.push_back(norm3({(va.x + vb.x) / 2, (va.y + vb.y) / 2, (va.z + vb.z) / 2}));
        const uint32_t idx = uint32_t(m.verts.size() - 1);
        midpoint.emplace(key, idx);
        return idx;
    };
    std::vector<std::array<uint32_t, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
        const uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
        next.push_back({f[0], ab, ca});
        next.push_back({f[1], bc, ab});
        next.push_back({f[2], ca, bc});
        next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
}

}  // namespace

Quat look_at_quat(Vec3 eye, Vec3 target, Vec3 up) {
    V3d f = norm3({double(target.x) - eye.x, double(target.y) - eye.y, double(target.z) - eye.z});
    V3d u0{double(up.x), double(up.y), double(up.z)};
    V3d r{f.y * u0.z - f.z * u0.y, f.z * u0.x - f.x * u0.z, f.x * u0.y - f.y * u0.x};
    if (r.x * r.x + r.y * r.y + r.z * r.z < 1e-12) {  // looking along up: pick another up
        u0 = {1, 0, 0};
        r = {f.y * u0.z - f.z * u0.y, f.z * u0.x - f.x * u0.z, f.x * u0.y - f.y * u0.x};
    }
    r = norm3(r);
    const V3d u{r.y * f.z - r.z * f.y, r.z * f.x - r.x * f.z, r.x * f.y - r.y * f.x};

    // Columns (r, u, -f): local x->right, y->up, -z->forward.
    const double m00 = r.x, m01 = u.x, m02 = -f.x;
    const double m10 = r.y, m11 = u.y, m12 = -f.y;
    const double m20 = r.z, m21 = u.z, m22 = -f.z;
    const double tr = m00 + m11 + m22;
    double qx, qy, qz, qw;
    if (tr > 0.0) {
        const double s = std::sqrt(tr + 1.0) * 2.0;
        qw = 0.25 * s;
        qx = (m21 - m12) / s;
        qy = (m02 - m20) / s;
        qz = (m10 - m01) / s;
    } else if (m00 > m11 && m00 > m22) {
        const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        qw = (m21 - m12) / s;
        qx = 0.25 * s;
        qy = (m01 + m10) / s;
        qz = (m02 + m20) / s;
    } else if (m11 > m22) {
        const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        qw = (m02 - m20) / s;
        qx = (m01 + m10) / s;
        qy = 0.25 * s;
        qz = (m12 + m21) / s;
    } else {
        const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        qw = (m10 - m01) / s;
        qx = (m02 + m20) / s;
        qy = (m12 + m21) / s;
        qz = 0.25 * s;
    }
    const double n = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    return Quat{float(qx / n), float(qy / n), float(qz / n), float(qw / n)};
}

Scene make_sphere_plane_scene(int subdivisions) {
    IcoMesh mesh = icosahedron();
    for (int i = 0; i < subdivisions; ++i) subdivide(mesh);

    Scene scene;
    scene.materials.push_back({Vec3{0.72f, 0.72f, 0.75f}});  // 0: ground
    scene.materials.push_back({Vec3{0.80f, 0.32f, 0.26f}});  // 1: sphere

    const double radius = 0.8;
    const V3d center{0.0, 1.2, 0.0};
    for (const auto& f : mesh.faces) {
        Triangle tri;
        Vec3* vs[3] = {&tri.v0, &tri.v1, &tri.v2};
        Vec3* ns[3] = {&tri.n0, &tri.n1, &tri.n2};
        for (int i = 0; i < 3; ++i) {
            const V3d& p = mesh.verts[f[size_t(i)]];  // unit position = smooth normal
            *vs[i] = Vec3{float(center.x + radius * p.x), float(center.y + radius * p.y),
                          float(center.z + radius * p.z)};
            *ns[i] = Vec3{float(p.x), float(p.y), float(p.z)};
        }
        tri.material_index = 1;
        scene.triangles.push_back(tri);
    }

    const float e = 6.0f;
    const Vec3 g0{-e, 0, -e}, g1{-e, 0, e}, g2{e, 0, e}, g3{e, 0, -e};
    const Vec3 up{0, 1, 0};
    scene.triangles.push_back(Triangle{g0, g1, g2, up, up, up, 0});
    scene.triangles.push_back(Triangle{g0, g2, g3, up, up, up, 0});

    Light overhead;
    overhead.kind = LightKind::point;
    overhead.position = Vec3{0.0f, 5.0f, 0.0f};
    overhead.intensity = Vec3{3.3f, 3.2f, 3.0f};
    Light oblique;
    oblique.kind = LightKind::point;
    oblique.position = Vec3{4.0f, 3.0f, 2.0f};
    oblique.intensity = Vec3{1.6f, 1.5f, 1.3f};
    Light fill;
    fill.kind = LightKind::directional;
    const V3d fd = norm3({-0.45, -1.0, -0.3});
    fill.direction = Vec3{float(fd.x), float(fd.y), float(fd.z)};
    fill.intensity = Vec3{0.5f, 0.55f, 0.7f};
    scene.lights = {overhead, oblique, fill};

    scene.background = Vec3{0.05f, 0.07f, 0.10f};
    scene.default_camera.position = Vec3{0.0f, 1.6f, 4.2f};
    scene.default_camera.orientation =
        look_at_quat(scene.default_camera.position, Vec3{0, 1, 0}, Vec3{0, 1, 0});
    scene.default_camera.vfov_deg = 60.0f;
    scene.default_camera.near_clip = 0.05f;
    return scene;
}

std::vector<FrameInput> make_orbit_trace(uint32_t frames, float vfov_deg) {
    std::vector<FrameInput> trace;
    trace.reserve(frames);
    const Vec3 target{0, 1, 0};
    const double radius = 4.2, height = 1.6;
    for (uint32_t k = 0; k < frames; ++k) {
        const double theta = 2.0 * 3.14159265358979323846 * double(k) / double(frames);
        FrameInput fi;
        fi.frame_id = k;
        fi.camera.position =
            Vec3{float(radius * std::sin(theta)), float(height), float(radius * std::cos(theta))};
        fi.camera.orientation = look_at_quat(fi.camera.position, target, Vec3{0, 1, 0});
        fi.camera.vfov_deg = vfov_deg;
        trace.push_back(fi);
    }
    return trace;
}

}  // namespace dhr
