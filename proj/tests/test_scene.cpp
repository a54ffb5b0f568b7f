#include <doctest.h>

#include <cmath>

#include "dhr/demo.hpp"
#include "dhr/scene.hpp"

using namespace dhr;

namespace {

const char* kMinimalScene = R"({
  "background": [0.1, 0.2, 0.3],
  "camera": {"pos": [0, 1, 3], "quat": [0, 0, 0, 1], "vfov": 60, "near": 0.05},
  "materials": [{"diffuse": [0.5, 0.5, 0.5]}],
  "lights": [{"type": "point", "pos": [0, 5, 0], "intensity": [1, 1, 1]}],
  "vertices": [[-1, 0, -1], [1, 0, -1], [0, 0, 1]],
  "triangles": [{"v": [0, 1, 2], "mat": 0}]
})";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    s.replace(s.find(from), from.size(), to);
    return s;
}

}  // namespace

TEST_CASE("minimal scene parses") {
    const Scene s = load_scene(kMinimalScene);
    CHECK(s.triangles.size() == 1);
    CHECK(s.materials.size() == 1);
    CHECK(s.lights.size() == 1);
    CHECK(s.background.x == doctest::Approx(0.1f));
    CHECK(s.default_camera.vfov_deg == 60.0f);
    CHECK(s.default_camera.near_clip == doctest::Approx(0.05f));
}

TEST_CASE("missing normals get the face normal") {
    const Scene s = load_scene(kMinimalScene);
    // Triangle in the y=0 plane, counter-clockwise as seen from +y.
    const Triangle& t = s.triangles[0];
    CHECK(t.n0.x == doctest::Approx(0.0f));
    CHECK(std::abs(t.n0.y) == doctest::Approx(1.0f));
    CHECK(t.n0 == t.n1);
    CHECK(t.n1 == t.n2);
    const float len = length(t.n0);
    CHECK(std::abs(len - 1.0f) <= 1e-4f);
}

TEST_CASE("non-unit vertex normals are renormalized in double") {
    const std::string text = replace(
        replace(kMinimalScene, "\"triangles\": [{\"v\": [0, 1, 2], \"mat\": 0}]",
                "\"triangles\": [{\"v\": [0, 1, 2], \"n\": [0, 0, 0], \"mat\": 0}]"),
        "\"vertices\"", "\"normals\": [[0, 10, 0]],\n  \"vertices\"");
    const Scene s = load_scene(text);
    CHECK(s.triangles[0].n0.y == doctest::Approx(1.0f));
    CHECK(std::abs(length(s.triangles[0].n0) - 1.0f) <= 1e-4f);
}

TEST_CASE("parse errors carry a reason") {
    CHECK_THROWS_AS(load_scene("{"), ParseError);
    CHECK_THROWS_WITH_AS(load_scene(replace(kMinimalScene, "\"vfov\": 60", "\"vfov\": 180")),
                         doctest::Contains("vfov"), ParseError);
    CHECK_THROWS_WITH_AS(
        load_scene(replace(kMinimalScene, "\"lights\": [{\"type\": \"point\", \"pos\": [0, 5, 0], "
                                          "\"intensity\": [1, 1, 1]}]",
                           "\"lights\": []")),
        doctest::Contains("no lights"), ParseError);
    CHECK_THROWS_WITH_AS(load_scene(replace(kMinimalScene, "\"mat\": 0", "\"mat\": 7")),
                         doctest::Contains("material index"), ParseError);
    CHECK_THROWS_WITH_AS(
        load_scene(replace(kMinimalScene, "[0, 0, 1]", "[-1, 0, -1]")),  // duplicate vertex
        doctest::Contains("degenerate"), ParseError);
    CHECK_THROWS_WITH_AS(
        load_scene(replace(kMinimalScene, "\"intensity\": [1, 1, 1]", "\"intensity\": [-1, 1, 1]")),
        doctest::Contains("nonnegative"), ParseError);
    CHECK_THROWS_WITH_AS(
        load_scene(replace(kMinimalScene, "\"quat\": [0, 0, 0, 1]", "\"quat\": [0, 0, 0, 0]")),
        doctest::Contains("quaternion"), ParseError);
}

TEST_CASE("serialize -> load is the identity on a real scene") {
    const Scene demo = make_sphere_plane_scene(1);
    const Scene reloaded = load_scene(serialize_scene(demo));
    CHECK(reloaded == demo);
    // And stable from there on (serialization is a fixpoint).
    CHECK(load_scene(serialize_scene(reloaded)) == reloaded);
}

TEST_CASE("scene hash: equal scenes agree, any field change disagrees") {
    const Scene a = make_sphere_plane_scene(1);
    Scene b = a;
    const uint64_t h = scene_hash(a);
    CHECK(scene_hash(b) == h);

    b.triangles[0].v0.x += 0.001f;
    CHECK(scene_hash(b) != h);
    b = a;
    b.lights[0].intensity.y += 0.5f;
    CHECK(scene_hash(b) != h);
    b = a;
    b.background.z += 0.01f;
    CHECK(scene_hash(b) != h);
    b = a;
    b.default_camera.vfov_deg = 61.0f;
    CHECK(scene_hash(b) != h);
    b = a;
    b.materials[0].diffuse.x += 0.01f;
    CHECK(scene_hash(b) != h);
}

TEST_CASE("hash is FNV-1a 64 over the canonical bytes") {
    // Independent FNV-1a evaluation over the canonical byte string.
    const Scene s = load_scene(kMinimalScene);
    const std::vector<uint8_t> bytes = canonical_scene_bytes(s);
    uint64_t h = 14695981039346656037ull;
    for (uint8_t byte : bytes) {
        h ^= byte;
        h *= 1099511628211ull;
    }
    CHECK(scene_hash(s) == h);
}

TEST_CASE("trace: parse, monotonicity, quat validation") {
    const char* good =
        "{\"frame\":0,\"pos\":[0,1,3],\"quat\":[0,0,0,1],\"vfov\":60}\n"
        "{\"frame\":2,\"pos\":[0,1,2.9],\"quat\":[0,0,0,1],\"vfov\":60}\n";
    const auto t = load_trace(good);
    REQUIRE(t.size() == 2);
    CHECK(t[0].frame_id == 0);
    CHECK(t[1].frame_id == 2);
    CHECK(t[1].camera.position.z == doctest::Approx(2.9f));

    CHECK_THROWS_WITH_AS(
        load_trace("{\"frame\":3,\"pos\":[0,1,3],\"quat\":[0,0,0,1],\"vfov\":60}\n"
                   "{\"frame\":3,\"pos\":[0,1,3],\"quat\":[0,0,0,1],\"vfov\":60}\n"),
        doctest::Contains("non-monotone"), ParseError);
    CHECK_THROWS_WITH_AS(
        load_trace("{\"frame\":0,\"pos\":[0,1,3],\"quat\":[0,0,0,1.01],\"vfov\":60}\n"),
        doctest::Contains("quaternion"), ParseError);
    CHECK(load_trace("\n  \n").empty());
}

TEST_CASE("trace serialize -> load round-trips") {
    const auto orbit = make_orbit_trace(8);
    const auto reloaded = load_trace(serialize_trace(orbit));
    REQUIRE(reloaded.size() == orbit.size());
    for (size_t i = 0; i < orbit.size(); ++i) {
        CHECK(reloaded[i].frame_id == orbit[i].frame_id);
        CHECK(reloaded[i].camera.position == orbit[i].camera.position);
        CHECK(reloaded[i].camera.orientation == orbit[i].camera.orientation);
        CHECK(reloaded[i].camera.vfov_deg == orbit[i].camera.vfov_deg);
    }
}

TEST_CASE("scene bounds cover all vertices") {
    const Scene s = make_sphere_plane_scene(1);
    const Aabb box = scene_bounds(s);
    for (const Triangle& t : s.triangles)
        for (Vec3 v : {t.v0, t.v1, t.v2}) {
            CHECK(v.x >= box.min.x);
            CHECK(v.y >= box.min.y);
            CHECK(v.z >= box.min.z);
            CHECK(v.x <= box.max.x);
            CHECK(v.y <= box.max.y);
            CHECK(v.z <= box.max.z);
        }
    CHECK(box.min.x == doctest::Approx(-6.0f));
    CHECK(box.max.y == doctest::Approx(2.0f));
}
