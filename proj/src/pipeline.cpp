#include "dhr/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>

#include "dhr/lz4.hpp"
#include "dhr/viscodec.hpp"

namespace dhr {
namespace {

uint64_t wall_us() {
    return uint64_t(std::chrono::duration_cast<std::chrono::microseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count());
}

bool plausible_camera(const FrameInputBody& b) {
    const float n2 = b.cam_quat.x * b.cam_quat.x + b.cam_quat.y * b.cam_quat.y +
                     b.cam_quat.z * b.cam_quat.z + b.cam_quat.w * b.cam_quat.w;
    return all_finite(b.cam_pos) && std::isfinite(n2) && std::fabs(n2 - 1.0f) <= 3e-3f &&
           std::isfinite(b.vfov_deg) && b.vfov_deg > 0.0f && b.vfov_deg < 180.0f;
}

}  // namespace

Camera session_camera(const Scene& scene, const Camera& frame_camera) {
    Camera cam = frame_camera;
    cam.near_clip = scene.default_camera.near_clip;
    return cam;
}

std::string metrics_csv_header() {
    return "frame_id,raster_us,trace_us,compress_us,bytes_sent,chunks_sent,wait_us,"
           "bitmap_frame_used,staleness,fallback_used,total_us";
}

std::string metrics_csv_row(const FrameMetrics& m) {
    std::string s = std::to_string(m.frame_id);
    auto put64 = [&](const std::optional<uint64_t>& v) {
        s += ',';
        if (v) s += std::to_string(*v);
    };
    auto put32 = [&](const std::optional<uint32_t>& v) {
        s += ',';
        if (v) s += std::to_string(*v);
    };
    put64(m.raster_us);
    put64(m.trace_us);
    put64(m.compress_us);
    put64(m.bytes_sent);
    put64(m.chunks_sent);
    put64(m.wait_us);
    put32(m.bitmap_frame_used);
    put32(m.staleness);
    s += ',';
    s += m.fallback_used ? '1' : '0';
    put64(m.total_us);
    return s;
}

ServerState::ServerState(Scene scene, ServerOptions opt)
    : scene_(std::move(scene)),
      bvh_(build_bvh(scene_)),
      epsilon_(shadow_epsilon(scene_)),
      hash_(dhr::scene_hash(scene_)),
      opt_(opt) {}

std::vector<std::vector<uint8_t>> ServerState::handle(std::span<const uint8_t> datagram,
                                                      uint64_t now_us) {
    (void)now_us;
    WireMessage msg;
    if (decode(datagram, msg) != WireError::ok) {
        ++stats_.ignored_msgs;
        return {};
    }

    switch (msg.type) {
        case MsgType::hello: {
            ++stats_.hellos;
            const auto& b = std::get<HelloBody>(msg.body);
            HelloBody ack = b;  // echo = accept; any corrected field = abort
            if (b.scene_hash != hash_) ack.scene_hash = hash_;
            if (b.n_lights != scene_.lights.size()) ack.n_lights = uint8_t(scene_.lights.size());
            if (b.width < 1 || b.width > 4096 || b.height < 1 || b.height > 4096)
                ack.width = ack.height = 0;
            if (b.max_payload < 64) ack.max_payload = 0;
            if (ack == b) {
                session_ = Session{msg.session_id, b.width, b.height, b.max_payload};
                last_frame_.reset();
            } else {
                ++stats_.aborted_hellos;
            }
            return {encode(WireMessage{MsgType::hello_ack, msg.session_id, msg.frame_id, ack})};
        }
        case MsgType::frame_input: {
            if (!session_ || msg.session_id != session_->id) {
                ++stats_.ignored_msgs;
                return {};
            }
            if (last_frame_ && msg.frame_id <= *last_frame_) {
                ++stats_.late_inputs;
                return {};
            }
            const auto& b = std::get<FrameInputBody>(msg.body);
            if (!plausible_camera(b)) {
                ++stats_.ignored_msgs;
                return {};
            }
            last_frame_ = msg.frame_id;

            // The exact float bits from the wire: both ends must rasterize
            // identically, so no renormalization here.
            Camera cam;
            cam.position = b.cam_pos;
            cam.orientation = b.cam_quat;
            cam.vfov_deg = b.vfov_deg;
            cam.near_clip = scene_.default_camera.near_clip;

            ServerFrameStats fs;
            fs.frame_id = msg.frame_id;

            uint64_t t = opt_.wall_metrics ? wall_us() : 0;
            const GBuffer g = opt_.parallel
                                  ? rasterize(scene_, cam, session_->width, session_->height)
                                  : rasterize_serial(scene_, cam, session_->width,
                                                     session_->height);
            if (opt_.wall_metrics) {
                const uint64_t t1 = wall_us();
                fs.raster_us = t1 - t;
                t = t1;
            }
            const VisibilityBitmap vis =
                opt_.parallel
                    ? trace_visibility(bvh_, g, scene_.lights, epsilon_, msg.frame_id)
                    : trace_visibility_serial(bvh_, g, scene_.lights, epsilon_, msg.frame_id);
            if (opt_.wall_metrics) {
                const uint64_t t1 = wall_us();
                fs.trace_us = t1 - t;
                t = t1;
            }
            const std::vector<uint8_t> packed = pack_bitmap(vis);
            const std::vector<uint8_t> compressed = lz4_compress(packed);
            if (opt_.wall_metrics) fs.compress_us = wall_us() - t;

            const std::vector<WireMessage> chunks =
                split_visibility(session_->id, msg.frame_id, compressed,
                                 uint32_t(packed.size()), session_->max_payload);
            std::vector<std::vector<uint8_t>> out;
            out.reserve(chunks.size());
            for (const WireMessage& c : chunks) {
                out.push_back(encode(c));
                fs.bytes_sent += out.back().size();
            }
            fs.chunks_sent = chunks.size();
            last_frame_stats_ = fs;
            ++stats_.frames_rendered;
            return out;
        }
        default:
            ++stats_.ignored_msgs;
            return {};
    }
}

void SimChannel::send(std::span<const uint8_t> datagram) {
    net_.a().send(datagram);
    pump_due(net_.now_us());
}

void SimChannel::pump_due(uint64_t t_us) {
    for (;;) {
        const auto ts = net_.next_delivery_us(SimNetwork::a_to_b);
        if (!ts || *ts > t_us) break;
        for (auto& d : net_.b().poll_receive(*ts))
            for (auto& reply : server_.handle(d, *ts)) net_.b().send(reply);
    }
    for (auto& d : net_.a().poll_receive(t_us)) {
        inbox_.push_back(std::move(d));
        if (inbox_.size() > 4096) inbox_.pop_front();  // socket-buffer analogue
    }
}

std::optional<std::vector<uint8_t>> SimChannel::recv_until(uint64_t deadline_us) {
    for (;;) {
        if (!inbox_.empty()) {
            auto d = std::move(inbox_.front());
            inbox_.pop_front();
            return d;
        }
        const auto ts = net_.next_delivery_us(SimNetwork::a_to_b);
        const auto tc = net_.next_delivery_us(SimNetwork::b_to_a);
        uint64_t next = UINT64_MAX;
        if (ts) next = *ts;
        if (tc && *tc < next) next = *tc;
        if (next == UINT64_MAX || next > deadline_us) {
            net_.advance_to(deadline_us);
            return std::nullopt;
        }
        if (ts && *ts == next) {
            // Server work first on ties so zero-latency replies surface at
            // the same virtual instant.
            for (auto& d : net_.b().poll_receive(next))
                for (auto& reply : server_.handle(d, next)) net_.b().send(reply);
        } else {
            for (auto& d : net_.a().poll_receive(next)) inbox_.push_back(std::move(d));
        }
    }
}

UdpChannel::UdpChannel(UdpEndpoint& ep) : ep_(ep) {
    epoch_ns_ = uint64_t(std::chrono::steady_clock::now().time_since_epoch().count());
}

uint64_t UdpChannel::now_us() {
    const uint64_t now_ns = uint64_t(std::chrono::steady_clock::now().time_since_epoch().count());
    return (now_ns - epoch_ns_) / 1000;
}

void UdpChannel::send(std::span<const uint8_t> datagram) { ep_.send(datagram); }

std::optional<std::vector<uint8_t>> UdpChannel::recv_until(uint64_t deadline_us) {
    for (;;) {
        if (!inbox_.empty()) {
            auto d = std::move(inbox_.front());
            inbox_.pop_front();
            return d;
        }
        for (auto& d : ep_.poll_receive(now_us())) inbox_.push_back(std::move(d));
        if (!inbox_.empty()) continue;
        const uint64_t now = now_us();
        if (now >= deadline_us) return std::nullopt;
        ep_.wait_readable_for(std::min<uint64_t>(deadline_us - now, 50000));
    }
}

BitmapChoice select_bitmap(const std::map<uint32_t, VisibilityBitmap>& store,
                           uint32_t frame_id) {
    BitmapChoice c;
    auto it = store.upper_bound(frame_id);
    if (it == store.begin()) {
        c.fallback_used = true;
        return c;
    }
    --it;
    c.bitmap = &it->second;
    c.frame_used = it->first;
    c.staleness = frame_id - it->first;
    return c;
}

ClientSession::ClientSession(Scene scene, ClientConfig cfg, Channel& ch)
    : scene_(std::move(scene)), cfg_(cfg), ch_(ch) {
    hello_body_ = HelloBody{cfg_.width, cfg_.height, uint8_t(scene_.lights.size()),
                            scene_hash(scene_), cfg_.max_payload};
}

bool ClientSession::handshake() {
    const std::vector<uint8_t> hello =
        encode(WireMessage{MsgType::hello, cfg_.session_id, 0, hello_body_});
    for (int attempt = 0; attempt < cfg_.hello_attempts; ++attempt) {
        ch_.send(hello);
        const uint64_t deadline = ch_.now_us() + uint64_t(cfg_.hello_timeout_ms) * 1000;
        while (auto d = ch_.recv_until(deadline)) {
            WireMessage msg;
            if (decode(*d, msg) != WireError::ok) {
                ++stats_.decode_errors;
                continue;
            }
            if (msg.type != MsgType::hello_ack || msg.session_id != cfg_.session_id) {
                ++stats_.ignored_msgs;
                continue;
            }
            // Anything but an exact echo is the server refusing the session.
            return std::get<HelloBody>(msg.body) == hello_body_;
        }
    }
    return false;
}

void ClientSession::handle_datagram(std::span<const uint8_t> datagram) {
    WireMessage msg;
    if (decode(datagram, msg) != WireError::ok) {
        ++stats_.decode_errors;
        return;
    }
    if (msg.session_id != cfg_.session_id || msg.type != MsgType::vis_chunk) {
        ++stats_.ignored_msgs;
        return;
    }
    auto done = reasm_.feed(msg);
    if (!done) return;
    const uint32_t plane_bytes = (uint32_t(cfg_.width) * cfg_.height + 7) / 8;
    const uint32_t expected = plane_bytes * uint32_t(scene_.lights.size());
    try {
        const std::vector<uint8_t> packed = lz4_decompress(done->second, expected);
        store_[done->first] = unpack_bitmap(packed, cfg_.width, cfg_.height,
                                            uint8_t(scene_.lights.size()), done->first);
    } catch (const std::exception&) {
        ++stats_.bad_bitmaps;  // never shade partial or corrupt data
    }
}

std::pair<ImageRgb8, FrameMetrics> ClientSession::run_frame(const FrameInput& input) {
    FrameMetrics m;
    m.frame_id = input.frame_id;
    const Camera cam = session_camera(scene_, input.camera);

    const uint64_t t0 = ch_.now_us();
    FrameInputBody body;
    body.timestamp_us = t0;
    body.cam_pos = cam.position;
    body.cam_quat = cam.orientation;
    body.vfov_deg = cam.vfov_deg;
    ch_.send(encode(WireMessage{MsgType::frame_input, cfg_.session_id, input.frame_id, body}));

    uint64_t t = cfg_.wall_metrics ? wall_us() : 0;
    last_gbuffer_ = cfg_.parallel ? rasterize(scene_, cam, cfg_.width, cfg_.height)
                                  : rasterize_serial(scene_, cam, cfg_.width, cfg_.height);
    m.raster_us = cfg_.wall_metrics ? wall_us() - t : 0;

    const uint64_t wait_start = ch_.now_us();
    if (cfg_.deadline_ms > 0) {
        const uint64_t deadline = t0 + uint64_t(cfg_.deadline_ms) * 1000;
        while (!store_.contains(input.frame_id)) {
            auto d = ch_.recv_until(deadline);
            if (!d) break;
            handle_datagram(*d);
        }
    }
    m.wait_us = ch_.now_us() - wait_start;

    const BitmapChoice choice = select_bitmap(store_, input.frame_id);
    VisibilityBitmap fallback;
    const VisibilityBitmap* vis = choice.bitmap;
    if (!vis) {
        fallback = all_visible_bitmap(cfg_.width, cfg_.height, uint8_t(scene_.lights.size()),
                                      input.frame_id);
        vis = &fallback;
    }
    t = cfg_.wall_metrics ? wall_us() : 0;
    ImageRgb8 img = cfg_.parallel ? shade(last_gbuffer_, *vis, scene_.lights, scene_.background)
                                  : shade_serial(last_gbuffer_, *vis, scene_.lights,
                                                 scene_.background);
    const uint64_t shade_us = cfg_.wall_metrics ? wall_us() - t : 0;

    m.bitmap_frame_used = choice.frame_used;
    m.staleness = choice.staleness;
    m.fallback_used = choice.fallback_used;
    m.total_us = *m.raster_us + *m.wait_us + shade_us;

    if (choice.frame_used)  // frames older than the one just used are never selected again
        store_.erase(store_.begin(), store_.lower_bound(*choice.frame_used));
    while (store_.size() > 8) store_.erase(store_.begin());

    return {std::move(img), m};
}

ImageRgb8 local_render(const Scene& scene, const Camera& camera, uint16_t width,
                       uint16_t height, bool parallel) {
    return local_render(scene, build_bvh(scene), camera, width, height, parallel);
}

ImageRgb8 local_render(const Scene& scene, const Bvh& bvh, const Camera& camera,
                       uint16_t width, uint16_t height, bool parallel) {
    const Camera cam = session_camera(scene, camera);
    const GBuffer g = parallel ? rasterize(scene, cam, width, height)
                               : rasterize_serial(scene, cam, width, height);
    const float eps = shadow_epsilon(scene);
    const VisibilityBitmap vis = parallel
                                     ? trace_visibility(bvh, g, scene.lights, eps)
                                     : trace_visibility_serial(bvh, g, scene.lights, eps);
    return parallel ? shade(g, vis, scene.lights, scene.background)
                    : shade_serial(g, vis, scene.lights, scene.background);
}

}  // namespace dhr
