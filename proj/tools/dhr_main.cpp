#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dhr/demo.hpp"
#include "dhr/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(text.data(), std::streamsize(text.size()));
}

// "--sim latency=5,jitter=2,loss=0.1,mtu=1500,seed=42"; every key optional.
dhr::NetConditions parse_sim(const std::string& text) {
    dhr::NetConditions nc;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const size_t eq = item.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad --sim entry '" + item + "' (want key=value)");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        size_t used = 0;
        try {
            if (key == "latency")
                nc.latency_ms = std::stod(val, &used);
            else if (key == "jitter")
                nc.jitter_ms = std::stod(val, &used);
            else if (key == "loss")
                nc.loss_prob = std::stod(val, &used);
            else if (key == "mtu")
                nc.mtu = uint32_t(std::stoul(val, &used));
            else if (key == "seed")
                nc.seed = std::stoull(val, &used);
            else
                throw std::runtime_error("unknown --sim key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("bad --sim value for '" + key + "': " + val);
        } catch (const std::out_of_range&) {
            throw std::runtime_error("bad --sim value for '" + key + "': " + val);
        }
        if (used != val.size())
            throw std::runtime_error("bad --sim value for '" + key + "': " + val);
    }
    if (nc.latency_ms < 0 || nc.jitter_ms < 0) throw std::runtime_error("--sim latency/jitter must be >= 0");
    if (nc.loss_prob < 0 || nc.loss_prob > 1) throw std::runtime_error("--sim loss must be in [0,1]");
    return nc;
}

void report(const dhr::RunResult& r, const std::string& out_dir) {
    uint64_t fallbacks = 0, stale = 0;
    for (const auto& m : r.metrics) {
        if (m.fallback_used) ++fallbacks;
        if (m.staleness && *m.staleness > 0) ++stale;
    }
    std::cerr << "wrote " << r.images.size() << " frames to " << out_dir << " (stale " << stale
              << ", fallback " << fallbacks << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dhr: thin-client rasterizer + remote ray-traced shadow service"};
    app.require_subcommand(1);

    std::string scene_path, trace_path, out_dir = "out";
    std::string listen = "0.0.0.0:7000", connect, sim;
    uint32_t width = 160, height = 120, deadline_ms = 33, session_id = 0;
    uint32_t max_payload = 1200;
    uint64_t max_frames = 0;
    bool wall_metrics = false, serial = false;

    auto add_render_flags = [&](CLI::App* c) {
        c->add_option("--width", width, "framebuffer width")->check(CLI::Range(1u, 4096u));
        c->add_option("--height", height, "framebuffer height")->check(CLI::Range(1u, 4096u));
        c->add_flag("--wall-metrics", wall_metrics,
                    "record wall-clock stage timings (default: virtual, reproducible)");
        c->add_flag("--serial", serial, "single-threaded kernels");
    };

    CLI::App* serve = app.add_subcommand("serve", "answer visibility queries over UDP");
    serve->add_option("--scene", scene_path, "scene file (.scene.json)")->required();
    serve->add_option("--listen", listen, "bind address host:port");
    serve->add_option("--max-frames", max_frames, "exit after rendering N frames (0 = forever)");
    serve->add_flag("--wall-metrics", wall_metrics, "record wall-clock stage timings");
    serve->add_flag("--serial", serial, "single-threaded kernels");

    CLI::App* client = app.add_subcommand("client", "run the thin-client pipeline over a trace");
    client->add_option("--scene", scene_path, "scene file (.scene.json)")->required();
    client->add_option("--trace", trace_path, "camera trace (.trace.jsonl)")->required();
    client->add_option("--out", out_dir, "output directory for frames + metrics.csv");
    CLI::Option* opt_connect =
        client->add_option("--connect", connect, "server address host:port (real UDP)");
    CLI::Option* opt_sim = client->add_option(
        "--sim", sim, "in-process simulation, e.g. latency=5,jitter=2,loss=0.1,mtu=1500,seed=42");
    opt_connect->excludes(opt_sim);
    opt_sim->excludes(opt_connect);
    client->add_option("--deadline-ms", deadline_ms, "per-frame wait budget (0 = never wait)");
    client->add_option("--max-payload", max_payload, "max chunk payload bytes")
        ->check(CLI::Range(64u, 65535u));
    client->add_option("--session-id", session_id, "session id (0 = derive from seed)");
    add_render_flags(client);

    CLI::App* local = app.add_subcommand("local", "single-process pipeline (oracle mode)");
    local->add_option("--scene", scene_path, "scene file (.scene.json)")->required();
    local->add_option("--trace", trace_path, "camera trace (.trace.jsonl)")->required();
    local->add_option("--out", out_dir, "output directory for frames + metrics.csv");
    add_render_flags(local);

    std::string scene_out = "sphere_plane.scene.json", trace_out = "orbit60.trace.jsonl";
    uint32_t gen_frames = 60;
    int subdivisions = 2;
    float gen_vfov = 60.0f;
    CLI::App* gen = app.add_subcommand("gen", "write the default sphere-over-plane assets");
    gen->add_option("--scene-out", scene_out, "scene output path");
    gen->add_option("--trace-out", trace_out, "trace output path");
    gen->add_option("--frames", gen_frames, "orbit frame count")->check(CLI::Range(1u, 100000u));
    gen->add_option("--subdivisions", subdivisions, "icosphere subdivision level")
        ->check(CLI::Range(0, 6));
    gen->add_option("--vfov", gen_vfov, "vertical field of view (degrees)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            write_file(scene_out, dhr::serialize_scene(dhr::make_sphere_plane_scene(subdivisions)));
            write_file(trace_out, dhr::serialize_trace(dhr::make_orbit_trace(gen_frames, gen_vfov)));
            std::cerr << "wrote " << scene_out << " and " << trace_out << "\n";
            return 0;
        }

        const dhr::Scene scene = dhr::load_scene(read_file(scene_path));

        if (serve->parsed()) {
            dhr::ServerOptions opt;
            opt.wall_metrics = wall_metrics;
            opt.parallel = !serial;
            return dhr::serve_udp(scene, listen, opt, max_frames, std::cerr);
        }

        const std::vector<dhr::FrameInput> trace = dhr::load_trace(read_file(trace_path));
        dhr::RunConfig cfg;
        cfg.width = uint16_t(width);
        cfg.height = uint16_t(height);
        cfg.deadline_ms = deadline_ms;
        cfg.max_payload = uint16_t(max_payload);
        cfg.wall_metrics = wall_metrics;
        cfg.parallel = !serial;
        cfg.session_id = session_id;

        dhr::RunResult r;
        if (local->parsed()) {
            r = dhr::run_local_session(scene, trace, cfg);
        } else if (!connect.empty()) {
            r = dhr::run_udp_session(scene, trace, cfg, connect);
        } else {
            cfg.net = parse_sim(sim);
            r = dhr::run_sim_session(scene, trace, cfg);
        }
        if (r.exit_code != 0) {
            std::cerr << "handshake failed\n";
            return r.exit_code;
        }
        dhr::write_run_outputs(r, out_dir);
        report(r, out_dir);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
