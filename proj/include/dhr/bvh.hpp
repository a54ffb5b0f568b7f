#pragma once

#include <cstdint>
#include <vector>

#include "dhr/scene.hpp"

namespace dhr {

struct BvhNode {
    Vec3 aabb_min, aabb_max;
    uint32_t left_or_first = 0;  // internal: left child index (right = left+1); leaf: first triangle
    uint32_t count = 0;          // triangles in leaf; 0 for internal nodes
    bool is_leaf() const { return count > 0; }
};

// Binary BVH built by object-median split on the longest node axis.
// Triangle geometry is copied in traversal order so occlusion queries do not
// touch the scene.
struct Bvh {
    std::vector<BvhNode> nodes;
    std::vector<uint32_t> triangle_order;  // permutation of scene triangle indices
    std::vector<Vec3> tri_v0, tri_e1, tri_e2;

    bool empty() const { return nodes.empty(); }
};

Bvh build_bvh(const Scene& scene);

// Any-hit query: true iff some triangle intersects origin + t*dir with
// t in (0, t_max). dir must be unit length.
bool occluded(const Bvh& bvh, Vec3 origin, Vec3 dir, float t_max);

}  // namespace dhr
