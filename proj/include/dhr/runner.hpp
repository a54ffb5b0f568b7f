#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dhr/pipeline.hpp"

namespace dhr {

struct RunConfig {
    uint16_t width = 160;
    uint16_t height = 120;
    uint32_t deadline_ms = 33;
    uint16_t max_payload = 1200;
    bool wall_metrics = false;  // default: virtual (deterministic) timings
    bool parallel = true;
    uint32_t session_id = 0;  // 0 = derive from net.seed
    NetConditions net;        // simulation parameters (both directions)
    // Test hook, invoked before each frame is sent; may mutate conditions.
    std::function<void(SimNetwork&, uint32_t frame_id)> sim_frame_hook;
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 bad input, 3 handshake failure
    std::vector<ImageRgb8> images;
    std::vector<FrameMetrics> metrics;
    ClientStats client_stats;
    ServerStats server_stats;  // sim mode only
};

// Distributed pipeline against the in-process simulator (lockstep, virtual
// time). Deterministic for fixed (scene, trace, config).
RunResult run_sim_session(const Scene& scene, const std::vector<FrameInput>& trace,
                          const RunConfig& cfg);

// Single-process oracle pipeline; same outputs layout.
RunResult run_local_session(const Scene& scene, const std::vector<FrameInput>& trace,
                            const RunConfig& cfg);

// Distributed pipeline over real UDP; `connect` = "host:port".
RunResult run_udp_session(const Scene& scene, const std::vector<FrameInput>& trace,
                          const RunConfig& cfg, const std::string& connect);

// UDP server loop. max_frames > 0 = stop after rendering that many frames
// (test convenience); 0 = serve until the process is killed.
int serve_udp(const Scene& scene, const std::string& listen, const ServerOptions& opt,
              uint64_t max_frames, std::ostream& log);

std::string metrics_csv(const std::vector<FrameMetrics>& rows);

// frame_%05d.ppm (numbered by frame_id) + metrics.csv under out_dir.
void write_run_outputs(const RunResult& r, const std::string& out_dir);

}  // namespace dhr
