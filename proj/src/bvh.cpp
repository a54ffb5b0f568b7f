#include "dhr/bvh.hpp"

#include <algorithm>
#include <cmath>

namespace dhr {
namespace {

// Node boxes are padded so slab-test rounding can never prune a box whose
// triangles the ray actually hits; the leaf retest keeps exactness.
constexpr float kBoxPad = 1e-6f;

struct BuildTri {
    Aabb bounds;
    Vec3 centroid;
    uint32_t index;
};

float axis_of(Vec3 v, int a) { return a == 0 ? v.x : (a == 1 ? v.y : v.z); }

// Children are allocated adjacently before recursing, so a node only needs
// its left child index.
void subdivide(std::vector<BuildTri>& tris, uint32_t node_index, size_t first, size_t count,
               Bvh& bvh) {
    Aabb box;
    for (size_t i = first; i < first + count; ++i) box.extend(tris[i].bounds);
    bvh.nodes[node_index].aabb_min = box.min;
    bvh.nodes[node_index].aabb_max = box.max;

    if (count <= 4) {
        bvh.nodes[node_index].left_or_first = uint32_t(first);
        bvh.nodes[node_index].count = uint32_t(count);
        return;
    }

    const Vec3 d = box.diagonal();
    const int axis = (d.x >= d.y && d.x >= d.z) ? 0 : (d.y >= d.z ? 1 : 2);
    std::sort(tris.begin() + first, tris.begin() + first + count,
              [axis](const BuildTri& a, const BuildTri& b) {
                  const float ca = axis_of(a.centroid, axis), cb = axis_of(b.centroid, axis);
                  return ca != cb ? ca < cb : a.index < b.index;
              });
    const size_t half = count / 2;

    const uint32_t left = uint32_t(bvh.nodes.size());
    bvh.nodes.push_back({});
    bvh.nodes.push_back({});
    bvh.nodes[node_index].left_or_first = left;
    bvh.nodes[node_index].count = 0;
    subdivide(tris, left, first, half, bvh);
    subdivide(tris, left + 1, first + half, count - half, bvh);
}

bool hit_aabb(const BvhNode& n, Vec3 origin, Vec3 inv_dir, float t_max) {
    float t0 = 0.0f, t1 = t_max;
    const float bmin[3] = {n.aabb_min.x, n.aabb_min.y, n.aabb_min.z};
    const float bmax[3] = {n.aabb_max.x, n.aabb_max.y, n.aabb_max.z};
    const float o[3] = {origin.x, origin.y, origin.z};
    const float inv[3] = {inv_dir.x, inv_dir.y, inv_dir.z};
    for (int a = 0; a < 3; ++a) {
        float ta = (bmin[a] - o[a]) * inv[a];
        float tb = (bmax[a] - o[a]) * inv[a];
        if (ta > tb) std::swap(ta, tb);
        // NaN from 0 * inf falls out: std::max/min keep the current bound.
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t0 <= t1 * 1.0001f + 1e-6f;
}

bool intersect_tri(Vec3 origin, Vec3 dir, Vec3 v0, Vec3 e1, Vec3 e2, float t_max) {
    const Vec3 pvec = cross(dir, e2);
    const float det = dot(e1, pvec);
    if (std::fabs(det) < 1e-12f) return false;
    const float inv_det = 1.0f / det;
    const Vec3 tvec = origin - v0;
    const float u = dot(tvec, pvec) * inv_det;
    if (u < 0.0f || u > 1.0f) return false;
    const Vec3 qvec = cross(tvec, e1);
    const float v = dot(dir, qvec) * inv_det;
    if (v < 0.0f || u + v > 1.0f) return false;
    const float t = dot(e2, qvec) * inv_det;
    return t > 0.0f && t < t_max;
}

}  // namespace

Bvh build_bvh(const Scene& scene) {
    Bvh bvh;
    const size_t n = scene.triangles.size();
    if (n == 0) return bvh;

    std::vector<BuildTri> tris(n);
    for (size_t i = 0; i < n; ++i) {
        const Triangle& t = scene.triangles[i];
        Aabb box;
        box.extend(t.v0);
        box.extend(t.v1);
        box.extend(t.v2);
        const Vec3 d = box.diagonal();
        const float pad = kBoxPad * (1.0f + std::max({std::fabs(box.min.x), std::fabs(box.max.x),
                                                      std::fabs(box.min.y), std::fabs(box.max.y),
                                                      std::fabs(box.min.z), std::fabs(box.max.z),
                                                      d.x, d.y, d.z}));
        box.min = box.min - Vec3{pad, pad, pad};
        box.max = box.max + Vec3{pad, pad, pad};
        tris[i] = {box, (t.v0 + t.v1 + t.v2) * (1.0f / 3.0f), uint32_t(i)};
    }

    bvh.nodes.reserve(2 * n);
    bvh.nodes.push_back({});
    subdivide(tris, 0, 0, n, bvh);

    bvh.triangle_order.resize(n);
    bvh.tri_v0.resize(n);
    bvh.tri_e1.resize(n);
    bvh.tri_e2.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const uint32_t src = tris[i].index;
        bvh.triangle_order[i] = src;
        const Triangle& t = scene.triangles[src];
        bvh.tri_v0[i] = t.v0;
        bvh.tri_e1[i] = t.v1 - t.v0;
        bvh.tri_e2[i] = t.v2 - t.v0;
    }
    return bvh;
}

bool occluded(const Bvh& bvh, Vec3 origin, Vec3 dir, float t_max) {
    if (bvh.empty()) return false;
    const Vec3 inv_dir{1.0f / dir.x, 1.0f / dir.y, 1.0f / dir.z};

    uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const BvhNode& node = bvh.nodes[stack[--sp]];
        if (!hit_aabb(node, origin, inv_dir, t_max)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = node.left_or_first; i < node.left_or_first + node.count; ++i)
                if (intersect_tri(origin, dir, bvh.tri_v0[i], bvh.tri_e1[i], bvh.tri_e2[i], t_max))
                    return true;
        } else {
            stack[sp++] = node.left_or_first;
            stack[sp++] = node.left_or_first + 1;
        }
    }
    return false;
}

}  // namespace dhr
