#include "dhr/scene.hpp"

#include <cmath>
#include <sstream>

#include "dhr/bytes.hpp"
#include "json.hpp"

namespace dhr {
namespace {

using json = nlohmann::json;

struct Vec3d {
    double x = 0.0, y = 0.0, z = 0.0;
};

Vec3d parse_vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
        throw ParseError(std::string(what) + ": expected array of 3 numbers");
    Vec3d v{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
        throw ParseError(std::string(what) + ": non-finite component");
    return v;
}

Vec3 narrow(Vec3d v) { return {float(v.x), float(v.y), float(v.z)}; }

// Values already unit within 5e-7 pass through untouched, so reloading a
// serialized scene reproduces identical floats (renormalizing would wobble
// the last bit).
Vec3 normalized_narrow(Vec3d v, const char* what) {
    const double len = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (len == 0.0) throw ParseError(std::string(what) + ": zero-length direction");
    if (std::abs(len - 1.0) <= 5e-7) return narrow(v);
    return {float(v.x / len), float(v.y / len), float(v.z / len)};
}

Quat parse_quat(const json& j, const char* what, double reject_beyond) {
    if (!j.is_array() || j.size() != 4) throw ParseError(std::string(what) + ": expected array of 4 numbers");
    const double x = j[0].get<double>(), y = j[1].get<double>(), z = j[2].get<double>(),
                 w = j[3].get<double>();
    const double n = std::sqrt(x * x + y * y + z * z + w * w);
    if (!std::isfinite(n) || n == 0.0) throw ParseError(std::string(what) + ": invalid quaternion");
    if (reject_beyond > 0.0 && std::abs(n - 1.0) > reject_beyond)
        throw ParseError(std::string(what) + ": non-unit quaternion");
    if (std::abs(n - 1.0) <= 5e-7) return {float(x), float(y), float(z), float(w)};
    return {float(x / n), float(y / n), float(z / n), float(w / n)};
}

Camera parse_camera(const json& j, const char* what, double quat_reject_beyond) {
    Camera cam;
    cam.position = narrow(parse_vec3(j.at("pos"), what));
    cam.orientation = parse_quat(j.at("quat"), what, quat_reject_beyond);
    const double vfov = j.at("vfov").get<double>();
    if (!(vfov > 0.0 && vfov < 180.0)) throw ParseError(std::string(what) + ": vfov out of (0,180)");
    cam.vfov_deg = float(vfov);
    if (j.contains("near")) {
        const double near = j["near"].get<double>();
        if (!(near > 0.0) || !std::isfinite(near)) throw ParseError(std::string(what) + ": near must be > 0");
        cam.near_clip = float(near);
    }
    return cam;
}

json vec3_json(Vec3 v) { return json::array({double(v.x), double(v.y), double(v.z)}); }
json quat_json(Quat q) { return json::array({double(q.x), double(q.y), double(q.z), double(q.w)}); }

void put_vec3(std::vector<uint8_t>& out, Vec3 v) {
    put_f32le(out, v.x);
    put_f32le(out, v.y);
    put_f32le(out, v.z);
}

}  // namespace

Scene load_scene(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene parse error: ") + e.what());
    }
    try {
        Scene scene;
        scene.background = narrow(parse_vec3(doc.at("background"), "background"));
        scene.default_camera = parse_camera(doc.at("camera"), "camera", /*reject_beyond=*/0.0);

        for (const auto& m : doc.at("materials")) {
            Vec3 d = narrow(parse_vec3(m.at("diffuse"), "material diffuse"));
            if (d.x < 0.0f || d.x > 1.0f || d.y < 0.0f || d.y > 1.0f || d.z < 0.0f || d.z > 1.0f)
                throw ParseError("material diffuse channel out of [0,1]");
            scene.materials.push_back({d});
        }

        for (const auto& l : doc.at("lights")) {
            Light light;
            const std::string type = l.at("type").get<std::string>();
            if (type == "point") {
                light.kind = LightKind::point;
                light.position = narrow(parse_vec3(l.at("pos"), "light pos"));
            } else if (type == "directional") {
                light.kind = LightKind::directional;
                light.direction = normalized_narrow(parse_vec3(l.at("dir"), "light dir"), "light dir");
            } else {
                throw ParseError("unknown light type: " + type);
            }
            light.intensity = narrow(parse_vec3(l.at("intensity"), "light intensity"));
            if (light.intensity.x < 0.0f || light.intensity.y < 0.0f || light.intensity.z < 0.0f)
                throw ParseError("light intensity must be nonnegative");
            scene.lights.push_back(light);
        }
        if (scene.lights.empty()) throw ParseError("no lights");
        if (scene.lights.size() > kMaxLights) throw ParseError("too many lights (max 64)");

        std::vector<Vec3d> vertices;
        for (const auto& v : doc.at("vertices")) vertices.push_back(parse_vec3(v, "vertex"));
        std::vector<Vec3d> normals;
        if (doc.contains("normals"))
            for (const auto& n : doc["normals"]) normals.push_back(parse_vec3(n, "normal"));

        for (const auto& t : doc.at("triangles")) {
            const auto& vi = t.at("v");
            if (!vi.is_array() || vi.size() != 3) throw ParseError("triangle: expected 3 vertex indices");
            Vec3d p[3];
            for (int i = 0; i < 3; ++i) {
                const size_t idx = vi[i].get<size_t>();
                if (idx >= vertices.size()) throw ParseError("vertex index out of range");
                p[i] = vertices[idx];
            }
            Triangle tri;
            tri.v0 = narrow(p[0]);
            tri.v1 = narrow(p[1]);
            tri.v2 = narrow(p[2]);

            // Face area check on the narrowed vertices the renderer will see.
            const Vec3 e1 = tri.v1 - tri.v0, e2 = tri.v2 - tri.v0;
            const Vec3 c = cross(e1, e2);
            if (dot(c, c) == 0.0f) throw ParseError("degenerate triangle (area 0)");

            if (t.contains("n")) {
                const auto& ni = t["n"];
                if (!ni.is_array() || ni.size() != 3) throw ParseError("triangle: expected 3 normal indices");
                Vec3 n[3];
                for (int i = 0; i < 3; ++i) {
                    const size_t idx = ni[i].get<size_t>();
                    if (idx >= normals.size()) throw ParseError("normal index out of range");
                    n[i] = normalized_narrow(normals[idx], "vertex normal");
                }
                tri.n0 = n[0];
                tri.n1 = n[1];
                tri.n2 = n[2];
            } else {
                const Vec3d e1d{double(tri.v1.x) - tri.v0.x, double(tri.v1.y) - tri.v0.y,
                                double(tri.v1.z) - tri.v0.z};
                const Vec3d e2d{double(tri.v2.x) - tri.v0.x, double(tri.v2.y) - tri.v0.y,
                                double(tri.v2.z) - tri.v0.z};
                const Vec3d fn{e1d.y * e2d.z - e1d.z * e2d.y, e1d.z * e2d.x - e1d.x * e2d.z,
                               e1d.x * e2d.y - e1d.y * e2d.x};
                tri.n0 = tri.n1 = tri.n2 = normalized_narrow(fn, "face normal");
            }

            tri.material_index = t.at("mat").get<uint32_t>();
            if (tri.material_index >= scene.materials.size())
                throw ParseError("material index out of range");
            scene.triangles.push_back(tri);
        }
        return scene;
    } catch (const json::exception& e) {
        throw ParseError(std::string("scene parse error: ") + e.what());
    }
}

std::string serialize_scene(const Scene& scene) {
    json doc;
    doc["background"] = vec3_json(scene.background);
    doc["camera"] = {{"pos", vec3_json(scene.default_camera.position)},
                     {"quat", quat_json(scene.default_camera.orientation)},
                     {"vfov", double(scene.default_camera.vfov_deg)},
                     {"near", double(scene.default_camera.near_clip)}};
    doc["materials"] = json::array();
    for (const auto& m : scene.materials) doc["materials"].push_back({{"diffuse", vec3_json(m.diffuse)}});
    doc["lights"] = json::array();
    for (const auto& l : scene.lights) {
        json lj;
        if (l.kind == LightKind::point) {
            lj["type"] = "point";
            lj["pos"] = vec3_json(l.position);
        } else {
            lj["type"] = "directional";
            lj["dir"] = vec3_json(l.direction);
        }
        lj["intensity"] = vec3_json(l.intensity);
        doc["lights"].push_back(lj);
    }
    // Vertices and normals are written unshared, three per triangle.
    doc["vertices"] = json::array();
    doc["normals"] = json::array();
    doc["triangles"] = json::array();
    for (size_t i = 0; i < scene.triangles.size(); ++i) {
        const Triangle& t = scene.triangles[i];
        for (Vec3 v : {t.v0, t.v1, t.v2}) doc["vertices"].push_back(vec3_json(v));
        for (Vec3 n : {t.n0, t.n1, t.n2}) doc["normals"].push_back(vec3_json(n));
        const size_t base = 3 * i;
        doc["triangles"].push_back({{"v", {base, base + 1, base + 2}},
                                    {"n", {base, base + 1, base + 2}},
                                    {"mat", t.material_index}});
    }
    return doc.dump(2) + "\n";
}

std::vector<FrameInput> load_trace(const std::string& text) {
    std::vector<FrameInput> trace;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            FrameInput fi;
            const int64_t frame = rec.at("frame").get<int64_t>();
            if (frame < 0 || frame > int64_t(UINT32_MAX))
                throw ParseError("trace line " + std::to_string(lineno) + ": frame id out of range");
            fi.frame_id = uint32_t(frame);
            if (!trace.empty() && fi.frame_id <= trace.back().frame_id)
                throw ParseError("trace line " + std::to_string(lineno) + ": non-monotone frame_id");
            fi.camera = parse_camera(rec, "trace camera", /*reject_beyond=*/1e-3);
            trace.push_back(fi);
        } catch (const json::exception& e) {
            throw ParseError("trace line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return trace;
}

std::string serialize_trace(const std::vector<FrameInput>& trace) {
    std::string out;
    for (const FrameInput& fi : trace) {
        json rec = {{"frame", fi.frame_id},
                    {"pos", vec3_json(fi.camera.position)},
                    {"quat", quat_json(fi.camera.orientation)},
                    {"vfov", double(fi.camera.vfov_deg)}};
        out += rec.dump();
        out += '\n';
    }
    return out;
}

std::vector<uint8_t> canonical_scene_bytes(const Scene& scene) {
    std::vector<uint8_t> out;
    put_u32le(out, uint32_t(scene.triangles.size()));
    for (const Triangle& t : scene.triangles) {
        for (Vec3 v : {t.v0, t.v1, t.v2, t.n0, t.n1, t.n2}) put_vec3(out, v);
        put_u32le(out, t.material_index);
    }
    put_u32le(out, uint32_t(scene.materials.size()));
    for (const Material& m : scene.materials) put_vec3(out, m.diffuse);
    put_u32le(out, uint32_t(scene.lights.size()));
    for (const Light& l : scene.lights) {
        put_u8(out, uint8_t(l.kind));
        put_vec3(out, l.kind == LightKind::point ? l.position : l.direction);
        put_vec3(out, l.intensity);
    }
    put_vec3(out, scene.default_camera.position);
    put_f32le(out, scene.default_camera.orientation.x);
    put_f32le(out, scene.default_camera.orientation.y);
    put_f32le(out, scene.default_camera.orientation.z);
    put_f32le(out, scene.default_camera.orientation.w);
    put_f32le(out, scene.default_camera.vfov_deg);
    put_f32le(out, scene.default_camera.near_clip);
    put_vec3(out, scene.background);
    return out;
}

uint64_t scene_hash(const Scene& scene) {
    const auto bytes = canonical_scene_bytes(scene);
    return fnv1a64(bytes);
}

Aabb scene_bounds(const Scene& scene) {
    Aabb box;
    for (const Triangle& t : scene.triangles) {
        box.extend(t.v0);
        box.extend(t.v1);
        box.extend(t.v2);
    }
    return box;
}

}  // namespace dhr
