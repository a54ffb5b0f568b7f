#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dhr/bvh.hpp"
#include "dhr/image.hpp"
#include "dhr/raster.hpp"
#include "dhr/scene.hpp"
#include "dhr/shade.hpp"
#include "dhr/transport.hpp"
#include "dhr/visibility.hpp"
#include "dhr/wire.hpp"

namespace dhr {

// Near plane is a session constant taken from the scene's default camera;
// traces carry only pose and field of view.
Camera session_camera(const Scene& scene, const Camera& frame_camera);

// One metrics.csv row. Fields that a mode cannot know (e.g. server timings
// in a real-UDP client, network fields in local mode) stay empty. By default
// compute timings are *virtual* (zero) so runs are byte-reproducible;
// wall-clock timing is opt-in.
struct FrameMetrics {
    uint32_t frame_id = 0;
    std::optional<uint64_t> raster_us;
    std::optional<uint64_t> trace_us;     // server side
    std::optional<uint64_t> compress_us;  // server side
    std::optional<uint64_t> bytes_sent;   // server side
    std::optional<uint64_t> chunks_sent;  // server side
    std::optional<uint64_t> wait_us;      // client side
    std::optional<uint32_t> bitmap_frame_used;
    std::optional<uint32_t> staleness;
    bool fallback_used = false;
    std::optional<uint64_t> total_us;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const FrameMetrics& m);

struct ServerFrameStats {
    uint32_t frame_id = 0;
    uint64_t raster_us = 0;
    uint64_t trace_us = 0;
    uint64_t compress_us = 0;
    uint64_t bytes_sent = 0;
    uint64_t chunks_sent = 0;
};

struct ServerStats {
    uint64_t hellos = 0;
    uint64_t aborted_hellos = 0;
    uint64_t frames_rendered = 0;
    uint64_t late_inputs = 0;
    uint64_t ignored_msgs = 0;  // decode errors, wrong session, unexpected types
};

struct ServerOptions {
    bool wall_metrics = false;
    bool parallel = true;
};

// Pure message->replies state machine, shared verbatim by the UDP serve
// loop and the in-process simulator.
class ServerState {
  public:
    explicit ServerState(Scene scene, ServerOptions opt = {});

    // `datagram` is one received datagram; returns datagrams to send back.
    std::vector<std::vector<uint8_t>> handle(std::span<const uint8_t> datagram,
                                             uint64_t now_us);

    uint64_t scene_hash() const { return hash_; }
    const ServerStats& stats() const { return stats_; }
    const std::optional<ServerFrameStats>& last_frame_stats() const { return last_frame_stats_; }

  private:
    struct Session {
        uint32_t id = 0;
        uint16_t width = 0;
        uint16_t height = 0;
        uint16_t max_payload = 0;
    };

    Scene scene_;
    Bvh bvh_;
    float epsilon_;
    uint64_t hash_;
    ServerOptions opt_;
    std::optional<Session> session_;
    std::optional<uint32_t> last_frame_;
    std::optional<ServerFrameStats> last_frame_stats_;
    ServerStats stats_;
};

// Client's view of the network. recv_until returns one datagram as soon as
// available, or nullopt once the deadline (in the channel's clock) passes.
class Channel {
  public:
    virtual ~Channel() = default;
    virtual void send(std::span<const uint8_t> datagram) = 0;
    virtual std::optional<std::vector<uint8_t>> recv_until(uint64_t deadline_us) = 0;
    virtual uint64_t now_us() = 0;
};

// Lockstep virtual-time channel: the server state machine runs in-process,
// driven from inside recv_until, so a whole distributed session is
// bit-reproducible.
class SimChannel : public Channel {
  public:
    SimChannel(SimNetwork& net, ServerState& server) : net_(net), server_(server) {}

    void send(std::span<const uint8_t> datagram) override;
    std::optional<std::vector<uint8_t>> recv_until(uint64_t deadline_us) override;
    uint64_t now_us() override { return net_.now_us(); }

    SimNetwork& network() { return net_; }
    ServerState& server() { return server_; }

  private:
    void pump_due(uint64_t t_us);

    SimNetwork& net_;
    ServerState& server_;
    std::deque<std::vector<uint8_t>> inbox_;
};

class UdpChannel : public Channel {
  public:
    explicit UdpChannel(UdpEndpoint& ep);
    void send(std::span<const uint8_t> datagram) override;
    std::optional<std::vector<uint8_t>> recv_until(uint64_t deadline_us) override;
    uint64_t now_us() override;

  private:
    UdpEndpoint& ep_;
    std::deque<std::vector<uint8_t>> inbox_;
    uint64_t epoch_ns_;
};

struct BitmapChoice {
    const VisibilityBitmap* bitmap = nullptr;  // null -> all-visible fallback
    std::optional<uint32_t> frame_used;
    std::optional<uint32_t> staleness;
    bool fallback_used = false;
};

// Exact frame preferred, else the newest complete older frame, else fallback.
BitmapChoice select_bitmap(const std::map<uint32_t, VisibilityBitmap>& store,
                           uint32_t frame_id);

struct ClientConfig {
    uint16_t width = 160;
    uint16_t height = 120;
    uint16_t max_payload = 1200;
    uint32_t deadline_ms = 33;  // 0 = never wait: always stale/fallback
    bool wall_metrics = false;
    bool parallel = true;
    uint32_t session_id = 1;
    int hello_attempts = 5;
    uint32_t hello_timeout_ms = 200;
};

struct ClientStats {
    uint64_t decode_errors = 0;
    uint64_t ignored_msgs = 0;
    uint64_t bad_bitmaps = 0;  // decompression/size failures
};

class ClientSession {
  public:
    ClientSession(Scene scene, ClientConfig cfg, Channel& ch);

    bool handshake();
    std::pair<ImageRgb8, FrameMetrics> run_frame(const FrameInput& input);

    const ClientStats& stats() const { return stats_; }
    const std::map<uint32_t, VisibilityBitmap>& bitmap_store() const { return store_; }
    const GBuffer& last_gbuffer() const { return last_gbuffer_; }

  private:
    void handle_datagram(std::span<const uint8_t> datagram);

    Scene scene_;
    ClientConfig cfg_;
    Channel& ch_;
    HelloBody hello_body_;
    Reassembler reasm_;
    std::map<uint32_t, VisibilityBitmap> store_;
    GBuffer last_gbuffer_;
    ClientStats stats_;
};

// The whole pipeline in one process, no network: the pixel-exact oracle.
ImageRgb8 local_render(const Scene& scene, const Camera& camera, uint16_t width,
                       uint16_t height, bool parallel = true);
ImageRgb8 local_render(const Scene& scene, const Bvh& bvh, const Camera& camera,
                       uint16_t width, uint16_t height, bool parallel = true);

}  // namespace dhr
