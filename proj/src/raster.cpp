#include "dhr/raster.hpp"

#include <cmath>
#include <stdexcept>

namespace dhr {
namespace {

// Vertex positions snap to a 1/256-pixel integer grid so edge functions are
// exact: shared edges rasterize gap- and overlap-free, and coverage does not
// depend on summation order.
constexpr int64_t kSubpixel = 256;
// Guard band for x/y clipping, in multiples of the viewport. Bounds snapped
// coordinates so the int64 edge functions cannot overflow.
constexpr double kGuardBand = 8.0;

struct ViewContext {
    Quat inv_orientation;
    Vec3 camera_pos;
    double focal = 0.0;   // pixels; height / (2 tan(vfov/2))
    double half_w = 0.0, half_h = 0.0;
    double near_clip = 0.0;
    double guard_kx = 0.0, guard_ky = 0.0;
};

ViewContext make_context(const Camera& camera, uint16_t width, uint16_t height) {
    ViewContext ctx;
    ctx.inv_orientation = conjugate(camera.orientation);
    ctx.camera_pos = camera.position;
    const double tan_half = std::tan(double(camera.vfov_deg) * (3.141592653589793 / 360.0));
    ctx.focal = double(height) / (2.0 * tan_half);
    ctx.half_w = 0.5 * width;
    ctx.half_h = 0.5 * height;
    ctx.near_clip = double(camera.near_clip);
    const double aspect = double(width) / double(height);
    ctx.guard_kx = kGuardBand * tan_half * aspect;
    ctx.guard_ky = kGuardBand * tan_half;
    return ctx;
}

Vec3 view_of(const ViewContext& ctx, Vec3 p) {
    return rotate(ctx.inv_orientation, p - ctx.camera_pos);
}

struct ClipVert {
    double vx, vy, vz;   // view space
    double wx, wy, wz;   // world position
    double nx, ny, nz;   // world normal (unnormalized during interpolation)
};

ClipVert lerp(const ClipVert& a, const ClipVert& b, double t) {
    ClipVert r;
    r.vx = a.vx + (b.vx - a.vx) * t;
    r.vy = a.vy + (b.vy - a.vy) * t;
    r.vz = a.vz + (b.vz - a.vz) * t;
    r.wx = a.wx + (b.wx - a.wx) * t;
    r.wy = a.wy + (b.wy - a.wy) * t;
    r.wz = a.wz + (b.wz - a.wz) * t;
    r.nx = a.nx + (b.nx - a.nx) * t;
    r.ny = a.ny + (b.ny - a.ny) * t;
    r.nz = a.nz + (b.nz - a.nz) * t;
    return r;
}

struct ClipPoly {
    ClipVert v[9];
    int n = 0;
};

template <typename PlaneFn>
void clip_against(ClipPoly& poly, PlaneFn plane) {
    ClipPoly out;
    for (int i = 0; i < poly.n; ++i) {
        const ClipVert& cur = poly.v[i];
        const ClipVert& nxt = poly.v[(i + 1) % poly.n];
        const double fc = plane(cur), fn = plane(nxt);
        if (fc >= 0.0) out.v[out.n++] = cur;
        if ((fc >= 0.0) != (fn >= 0.0)) out.v[out.n++] = lerp(cur, nxt, fc / (fc - fn));
    }
    poly = out;
}

struct TriSetup {
    int64_t sx[3], sy[3];   // snapped screen coordinates
    int64_t area2 = 0;
    bool top_left[3] = {};
    double inv_depth[3];    // 1 / view_depth per vertex
    double wx[3], wy[3], wz[3];
    double nx[3], ny[3], nz[3];
    Vec3 albedo;
    int px0 = 0, px1 = -1, py0 = 0, py1 = -1;  // inclusive pixel bbox
};

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b, r = a % b;
    return (r != 0 && (r < 0) != (b < 0)) ? q - 1 : q;
}

int64_t edge(int64_t ax, int64_t ay, int64_t bx, int64_t by, int64_t px, int64_t py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// Emits the screen-space setup for one clipped sub-triangle, or skips it when
// its snapped area collapses to zero or its bbox misses every pixel center.
void setup_triangle(const ViewContext& ctx, const ClipVert& a, const ClipVert& b, const ClipVert& c,
                    Vec3 albedo, uint16_t width, uint16_t height, std::vector<TriSetup>& out) {
    TriSetup t;
    const ClipVert* verts[3] = {&a, &b, &c};
    for (int i = 0; i < 3; ++i) {
        const double d = -verts[i]->vz;
        const double sx = ctx.half_w + verts[i]->vx / d * ctx.focal;
        const double sy = ctx.half_h - verts[i]->vy / d * ctx.focal;
        t.sx[i] = std::llround(sx * kSubpixel);
        t.sy[i] = std::llround(sy * kSubpixel);
        t.inv_depth[i] = 1.0 / d;
        t.wx[i] = verts[i]->wx;
        t.wy[i] = verts[i]->wy;
        t.wz[i] = verts[i]->wz;
        t.nx[i] = verts[i]->nx;
        t.ny[i] = verts[i]->ny;
        t.nz[i] = verts[i]->nz;
    }
    t.albedo = albedo;

    t.area2 = edge(t.sx[0], t.sy[0], t.sx[1], t.sy[1], t.sx[2], t.sy[2]);
    if (t.area2 == 0) return;
    if (t.area2 < 0) {
        std::swap(t.sx[1], t.sx[2]);
        std::swap(t.sy[1], t.sy[2]);
        std::swap(t.inv_depth[1], t.inv_depth[2]);
        std::swap(t.wx[1], t.wx[2]);
        std::swap(t.wy[1], t.wy[2]);
        std::swap(t.wz[1], t.wz[2]);
        std::swap(t.nx[1], t.nx[2]);
        std::swap(t.ny[1], t.ny[2]);
        std::swap(t.nz[1], t.nz[2]);
        t.area2 = -t.area2;
    }

    // Edge i runs from vertex i+1 to vertex i+2 (opposite vertex i). With the
    // interior on the positive side, ties land inside on top and left edges.
    for (int i = 0; i < 3; ++i) {
        const int ia = (i + 1) % 3, ib = (i + 2) % 3;
        t.top_left[i] = (t.sy[ia] == t.sy[ib]) ? (t.sx[ib] > t.sx[ia]) : (t.sy[ib] < t.sy[ia]);
    }

    int64_t min_sx = std::min({t.sx[0], t.sx[1], t.sx[2]});
    int64_t max_sx = std::max({t.sx[0], t.sx[1], t.sx[2]});
    int64_t min_sy = std::min({t.sy[0], t.sy[1], t.sy[2]});
    int64_t max_sy = std::max({t.sy[0], t.sy[1], t.sy[2]});
    const int64_t half = kSubpixel / 2;
    t.px0 = int(std::max<int64_t>(0, -floor_div(-(min_sx - half), kSubpixel)));
    t.px1 = int(std::min<int64_t>(width - 1, floor_div(max_sx - half, kSubpixel)));
    t.py0 = int(std::max<int64_t>(0, -floor_div(-(min_sy - half), kSubpixel)));
    t.py1 = int(std::min<int64_t>(height - 1, floor_div(max_sy - half, kSubpixel)));
    if (t.px0 > t.px1 || t.py0 > t.py1) return;
    out.push_back(t);
}

void raster_row(const TriSetup& t, int y, GBuffer& g) {
    const int64_t py = int64_t(y) * kSubpixel + kSubpixel / 2;
    int64_t w[3], step[3];
    for (int i = 0; i < 3; ++i) {
        const int ia = (i + 1) % 3, ib = (i + 2) % 3;
        const int64_t px = int64_t(t.px0) * kSubpixel + kSubpixel / 2;
        w[i] = edge(t.sx[ia], t.sy[ia], t.sx[ib], t.sy[ib], px, py);
        step[i] = -kSubpixel * (t.sy[ib] - t.sy[ia]);
    }
    const double inv_area = 1.0 / double(t.area2);
    for (int x = t.px0; x <= t.px1; ++x) {
        bool inside = true;
        for (int i = 0; i < 3; ++i) {
            if (w[i] < 0 || (w[i] == 0 && !t.top_left[i])) {
                inside = false;
                break;
            }
        }
        if (inside) {
            const double l0 = double(w[0]) * inv_area;
            const double l1 = double(w[1]) * inv_area;
            const double l2 = double(w[2]) * inv_area;
            const double inv_d = l0 * t.inv_depth[0] + l1 * t.inv_depth[1] + l2 * t.inv_depth[2];
            const float depth = float(1.0 / inv_d);
            const size_t p = g.index(x, y);
            if (depth < g.depth[p]) {
                const double k0 = l0 * t.inv_depth[0], k1 = l1 * t.inv_depth[1],
                             k2 = l2 * t.inv_depth[2];
                const double persp = 1.0 / inv_d;
                const double wx = (k0 * t.wx[0] + k1 * t.wx[1] + k2 * t.wx[2]) * persp;
                const double wy = (k0 * t.wy[0] + k1 * t.wy[1] + k2 * t.wy[2]) * persp;
                const double wz = (k0 * t.wz[0] + k1 * t.wz[1] + k2 * t.wz[2]) * persp;
                double nx = (k0 * t.nx[0] + k1 * t.nx[1] + k2 * t.nx[2]) * persp;
                double ny = (k0 * t.ny[0] + k1 * t.ny[1] + k2 * t.ny[2]) * persp;
                double nz = (k0 * t.nz[0] + k1 * t.nz[1] + k2 * t.nz[2]) * persp;
                const double nlen = std::sqrt(nx * nx + ny * ny + nz * nz);
                if (nlen > 0.0) {
                    nx /= nlen;
                    ny /= nlen;
                    nz /= nlen;
                }
                g.depth[p] = depth;
                g.world_pos[p] = {float(wx), float(wy), float(wz)};
                g.normal[p] = {float(nx), float(ny), float(nz)};
                g.albedo[p] = t.albedo;
                g.valid[p] = 1;
            }
        }
        for (int i = 0; i < 3; ++i) w[i] += step[i];
    }
}

GBuffer rasterize_impl(const Scene& scene, const Camera& camera, uint16_t width, uint16_t height,
                       bool parallel) {
    if (width < 1 || width > 4096 || height < 1 || height > 4096)
        throw std::invalid_argument("resolution out of [1,4096]");

    GBuffer g;
    g.width = width;
    g.height = height;
    const size_t n = g.pixel_count();
    g.world_pos.assign(n, Vec3{});
    g.normal.assign(n, Vec3{});
    g.albedo.assign(n, Vec3{});
    g.depth.assign(n, INFINITY);
    g.valid.assign(n, 0);

    const ViewContext ctx = make_context(camera, width, height);

    std::vector<TriSetup> setups;
    setups.reserve(scene.triangles.size());
    for (const Triangle& tri : scene.triangles) {
        ClipPoly poly;
        poly.n = 3;
        const Vec3* vs[3] = {&tri.v0, &tri.v1, &tri.v2};
        const Vec3* ns[3] = {&tri.n0, &tri.n1, &tri.n2};
        for (int i = 0; i < 3; ++i) {
            const Vec3 v = view_of(ctx, *vs[i]);
            poly.v[i] = {double(v.x), double(v.y), double(v.z),
                         double(vs[i]->x), double(vs[i]->y), double(vs[i]->z),
                         double(ns[i]->x), double(ns[i]->y), double(ns[i]->z)};
        }
        clip_against(poly, [&](const ClipVert& v) { return -v.vz - ctx.near_clip; });
        clip_against(poly, [&](const ClipVert& v) { return v.vx + ctx.guard_kx * -v.vz; });
        clip_against(poly, [&](const ClipVert& v) { return ctx.guard_kx * -v.vz - v.vx; });
        clip_against(poly, [&](const ClipVert& v) { return v.vy + ctx.guard_ky * -v.vz; });
        clip_against(poly, [&](const ClipVert& v) { return ctx.guard_ky * -v.vz - v.vy; });

        const Vec3 albedo = scene.materials[tri.material_index].diffuse;
        for (int i = 2; i < poly.n; ++i)
            setup_triangle(ctx, poly.v[0], poly.v[i - 1], poly.v[i], albedo, width, height, setups);
    }

    // Row bins keep the per-pixel triangle order identical to the serial
    // triangle-major loop, so row parallelism cannot change any output bit.
    std::vector<std::vector<uint32_t>> bins(height);
    for (uint32_t i = 0; i < setups.size(); ++i)
        for (int y = setups[i].py0; y <= setups[i].py1; ++y) bins[y].push_back(i);

    auto process_row = [&](int y) {
        for (uint32_t i : bins[y]) raster_row(setups[i], y, g);
    };

    if (parallel) {
#pragma omp parallel for schedule(static)
        for (int y = 0; y < int(height); ++y) process_row(y);
    } else {
        for (int y = 0; y < int(height); ++y) process_row(y);
    }
    return g;
}

}  // namespace

std::optional<ProjectedVertex> project_vertex(const Camera& camera, uint16_t width, uint16_t height,
                                              Vec3 p) {
    const ViewContext ctx = make_context(camera, width, height);
    const Vec3 v = view_of(ctx, p);
    const float depth = -v.z;
    if (depth < camera.near_clip) return std::nullopt;
    const double d = double(depth);
    return ProjectedVertex{float(ctx.half_w + double(v.x) / d * ctx.focal),
                           float(ctx.half_h - double(v.y) / d * ctx.focal), depth};
}

GBuffer rasterize(const Scene& scene, const Camera& camera, uint16_t width, uint16_t height) {
    return rasterize_impl(scene, camera, width, height, true);
}

GBuffer rasterize_serial(const Scene& scene, const Camera& camera, uint16_t width, uint16_t height) {
    return rasterize_impl(scene, camera, width, height, false);
}

}  // namespace dhr
