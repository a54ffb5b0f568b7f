#include <doctest.h>

#include <atomic>
#include <deque>
#include <thread>

#include "dhr/demo.hpp"
#include "dhr/lz4.hpp"
#include "dhr/pipeline.hpp"
#include "dhr/viscodec.hpp"

using namespace dhr;

namespace {

// Channel that replays canned datagrams, for driving the client state machine
// without a server. Time jumps straight to the deadline when the script runs dry.
class ScriptedChannel : public Channel {
  public:
    void send(std::span<const uint8_t> datagram) override {
        sent.emplace_back(datagram.begin(), datagram.end());
    }
    std::optional<std::vector<uint8_t>> recv_until(uint64_t deadline_us) override {
        if (script.empty()) {
            if (deadline_us > now) now = deadline_us;
            return std::nullopt;
        }
        auto d = std::move(script.front());
        script.pop_front();
        return d;
    }
    uint64_t now_us() override { return now; }

    std::deque<std::vector<uint8_t>> script;
    std::vector<std::vector<uint8_t>> sent;
    uint64_t now = 0;
};

VisibilityBitmap noisy_bitmap(uint16_t w, uint16_t h, uint8_t n_lights, uint32_t fid) {
    VisibilityBitmap v = make_bitmap(w, h, n_lights, fid);
    const uint32_t pixels = uint32_t(w) * h;
    for (uint8_t l = 0; l < n_lights; ++l)
        for (uint32_t p = 0; p < pixels; ++p) v.set(l, p, ((p * 2654435761u) ^ l) & 1);
    return v;
}

std::vector<std::vector<uint8_t>> chunk_datagrams(uint32_t session, const VisibilityBitmap& v,
                                                  uint16_t max_payload) {
    const std::vector<uint8_t> packed = pack_bitmap(v);
    const std::vector<uint8_t> compressed = lz4_compress(packed);
    std::vector<std::vector<uint8_t>> out;
    for (const WireMessage& m :
         split_visibility(session, v.frame_id, compressed, uint32_t(packed.size()), max_payload))
        out.push_back(encode(m));
    return out;
}

}  // namespace

TEST_CASE("metrics csv header and row formatting") {
    CHECK(metrics_csv_header() ==
          "frame_id,raster_us,trace_us,compress_us,bytes_sent,chunks_sent,wait_us,"
          "bitmap_frame_used,staleness,fallback_used,total_us");

    FrameMetrics empty;
    empty.frame_id = 7;
    CHECK(metrics_csv_row(empty) == "7,,,,,,,,,0,");

    FrameMetrics full;
    full.frame_id = 3;
    full.raster_us = 10;
    full.trace_us = 20;
    full.compress_us = 5;
    full.bytes_sent = 1000;
    full.chunks_sent = 2;
    full.wait_us = 7;
    full.bitmap_frame_used = 3;
    full.staleness = 0;
    full.fallback_used = false;
    full.total_us = 17;
    CHECK(metrics_csv_row(full) == "3,10,20,5,1000,2,7,3,0,0,17");

    FrameMetrics fb;
    fb.frame_id = 12;
    fb.raster_us = 4;
    fb.wait_us = 33000;
    fb.fallback_used = true;  // no bitmap columns on fallback rows
    fb.total_us = 33004;
    CHECK(metrics_csv_row(fb) == "12,4,,,,,33000,,,1,33004");
}

TEST_CASE("session camera keeps the pose but pins the scene's near plane") {
    Scene scene = make_sphere_plane_scene(0);
    scene.default_camera.near_clip = 0.25f;
    Camera frame;
    frame.position = {1, 2, 3};
    frame.orientation = {0, 1, 0, 0};
    frame.vfov_deg = 45.0f;
    frame.near_clip = 0.001f;  // whatever the trace said is ignored
    const Camera cam = session_camera(scene, frame);
    CHECK(cam.position == frame.position);
    CHECK(cam.orientation == frame.orientation);
    CHECK(cam.vfov_deg == 45.0f);
    CHECK(cam.near_clip == 0.25f);
}

TEST_CASE("select_bitmap prefers exact, then newest older, then fallback") {
    std::map<uint32_t, VisibilityBitmap> store;
    store[3] = make_bitmap(4, 4, 1, 3);
    store[5] = make_bitmap(4, 4, 1, 5);

    auto exact = select_bitmap(store, 5);
    REQUIRE(exact.bitmap);
    CHECK(exact.bitmap->frame_id == 5);
    CHECK(*exact.frame_used == 5);
    CHECK(*exact.staleness == 0);
    CHECK(!exact.fallback_used);

    auto stale = select_bitmap(store, 4);
    REQUIRE(stale.bitmap);
    CHECK(*stale.frame_used == 3);
    CHECK(*stale.staleness == 1);

    auto newer = select_bitmap(store, 9);
    REQUIRE(newer.bitmap);
    CHECK(*newer.frame_used == 5);
    CHECK(*newer.staleness == 4);

    auto cold = select_bitmap(store, 2);  // only newer frames stored
    CHECK(cold.bitmap == nullptr);
    CHECK(!cold.frame_used);
    CHECK(!cold.staleness);
    CHECK(cold.fallback_used);

    auto none = select_bitmap({}, 0);
    CHECK(none.fallback_used);
}

TEST_CASE("server accepts only an exactly matching hello") {
    const Scene scene = make_sphere_plane_scene(1);
    ServerState server(scene);
    const HelloBody good{96, 72, uint8_t(scene.lights.size()), scene_hash(scene), 1200};

    auto ack_for = [&](const HelloBody& h) {
        auto replies = server.handle(encode(WireMessage{MsgType::hello, 1, 0, h}), 0);
        REQUIRE(replies.size() == 1);
        WireMessage m;
        REQUIRE(decode(replies[0], m) == WireError::ok);
        REQUIRE(m.type == MsgType::hello_ack);
        CHECK(m.session_id == 1);
        return std::get<HelloBody>(m.body);
    };

    CHECK(ack_for(good) == good);  // exact echo = accepted
    CHECK(server.stats().aborted_hellos == 0);

    HelloBody wrong_hash = good;
    wrong_hash.scene_hash ^= 1;
    CHECK(ack_for(wrong_hash).scene_hash == scene_hash(scene));  // corrected, not echoed
    CHECK(server.stats().aborted_hellos == 1);

    HelloBody wrong_lights = good;
    wrong_lights.n_lights = uint8_t(scene.lights.size() + 1);
    CHECK(ack_for(wrong_lights).n_lights == scene.lights.size());

    HelloBody bad_dims = good;
    bad_dims.width = 0;
    CHECK(ack_for(bad_dims).width == 0);
    CHECK(ack_for(bad_dims).height == 0);

    HelloBody huge = good;
    huge.height = 5000;
    CHECK(ack_for(huge).height == 0);

    HelloBody tiny_payload = good;
    tiny_payload.max_payload = 63;
    CHECK(ack_for(tiny_payload).max_payload == 0);

    CHECK(server.stats().hellos == 7);
}

TEST_CASE("server renders a frame whose chunks carry the exact traced bitmap") {
    const Scene scene = make_sphere_plane_scene(1);
    ServerState server(scene);
    const uint16_t w = 96, h = 72;
    const HelloBody hello{w, h, uint8_t(scene.lights.size()), scene_hash(scene), 600};
    REQUIRE(server.handle(encode(WireMessage{MsgType::hello, 42, 0, hello}), 0).size() == 1);

    const FrameInput f = make_orbit_trace(16)[3];
    const Camera cam = session_camera(scene, f.camera);
    FrameInputBody body{0, cam.position, cam.orientation, cam.vfov_deg};
    const auto out =
        server.handle(encode(WireMessage{MsgType::frame_input, 42, f.frame_id, body}), 0);
    REQUIRE(!out.empty());

    // Reassemble what went on the wire and compare to an independent trace.
    Reassembler reasm;
    std::optional<std::pair<uint32_t, std::vector<uint8_t>>> done;
    uint64_t total_bytes = 0;
    for (const auto& d : out) {
        total_bytes += d.size();
        WireMessage m;
        REQUIRE(decode(d, m) == WireError::ok);
        REQUIRE(m.type == MsgType::vis_chunk);
        CHECK(m.session_id == 42);
        CHECK(m.frame_id == f.frame_id);
        CHECK(std::get<VisChunkBody>(m.body).payload.size() <= 600);
        if (auto r = reasm.feed(m)) done = std::move(r);
    }
    REQUIRE(done);

    const Bvh bvh = build_bvh(scene);
    const GBuffer g = rasterize_serial(scene, cam, w, h);
    const VisibilityBitmap expected =
        trace_visibility_serial(bvh, g, scene.lights, shadow_epsilon(scene), f.frame_id);
    const auto packed = lz4_decompress(done->second, uint32_t(pack_bitmap(expected).size()));
    CHECK(unpack_bitmap(packed, w, h, uint8_t(scene.lights.size()), f.frame_id) == expected);

    REQUIRE(server.last_frame_stats());
    CHECK(server.last_frame_stats()->frame_id == f.frame_id);
    CHECK(server.last_frame_stats()->bytes_sent == total_bytes);
    CHECK(server.last_frame_stats()->chunks_sent == out.size());
    CHECK(server.stats().frames_rendered == 1);
}

TEST_CASE("server ignores junk, wrong sessions, late frames, absurd cameras") {
    const Scene scene = make_sphere_plane_scene(0);
    ServerState server(scene);
    const HelloBody hello{64, 48, uint8_t(scene.lights.size()), scene_hash(scene), 1200};
    FrameInputBody body{0, {0, 1, 5}, {0, 0, 0, 1}, 60.0f};

    // No session yet: frame input ignored.
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 1, body}), 0).empty());
    CHECK(server.stats().ignored_msgs == 1);

    server.handle(encode(WireMessage{MsgType::hello, 9, 0, hello}), 0);

    // Wrong session id.
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 8, 1, body}), 0).empty());
    CHECK(server.stats().ignored_msgs == 2);

    // Valid frame renders; replaying it (or anything older) counts as late.
    CHECK(!server.handle(encode(WireMessage{MsgType::frame_input, 9, 5, body}), 0).empty());
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 5, body}), 0).empty());
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 4, body}), 0).empty());
    CHECK(server.stats().late_inputs == 2);

    // Implausible cameras never reach the renderer.
    FrameInputBody unnorm = body;
    unnorm.cam_quat = {0, 0, 0, 1.5f};
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 6, unnorm}), 0).empty());
    FrameInputBody nan_pos = body;
    nan_pos.cam_pos.x = std::numeric_limits<float>::quiet_NaN();
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 7, nan_pos}), 0).empty());
    FrameInputBody bad_fov = body;
    bad_fov.vfov_deg = 0.0f;
    CHECK(server.handle(encode(WireMessage{MsgType::frame_input, 9, 8, bad_fov}), 0).empty());
    CHECK(server.stats().ignored_msgs == 5);

    // Undecodable datagrams and client-bound types are counted and dropped.
    CHECK(server.handle(std::vector<uint8_t>{1, 2, 3}, 0).empty());
    CHECK(server
              .handle(encode(WireMessage{MsgType::vis_chunk, 9, 1, VisChunkBody{0, 1, 0, 0, {}}}),
                      0)
              .empty());
    CHECK(server.stats().ignored_msgs == 7);
    CHECK(server.stats().frames_rendered == 1);
}

TEST_CASE("client handshake accepts only the exact echo") {
    const Scene scene = make_sphere_plane_scene(0);
    ClientConfig cfg;
    cfg.width = 64;
    cfg.height = 48;
    const HelloBody mine{cfg.width, cfg.height, uint8_t(scene.lights.size()), scene_hash(scene),
                         cfg.max_payload};

    SUBCASE("echo -> accepted") {
        ScriptedChannel ch;
        ch.script.push_back(encode(WireMessage{MsgType::hello_ack, cfg.session_id, 0, mine}));
        ClientSession client(scene, cfg, ch);
        CHECK(client.handshake());
        REQUIRE(ch.sent.size() == 1);
        WireMessage m;
        REQUIRE(decode(ch.sent[0], m) == WireError::ok);
        CHECK(m.type == MsgType::hello);
        CHECK(std::get<HelloBody>(m.body) == mine);
    }
    SUBCASE("corrected ack -> immediate abort, no retries") {
        ScriptedChannel ch;
        HelloBody corrected = mine;
        corrected.scene_hash ^= 0xdeadbeef;
        ch.script.push_back(encode(WireMessage{MsgType::hello_ack, cfg.session_id, 0, corrected}));
        ClientSession client(scene, cfg, ch);
        CHECK(!client.handshake());
        CHECK(ch.sent.size() == 1);
    }
    SUBCASE("silence -> one hello per attempt, then failure") {
        ScriptedChannel ch;
        ClientSession client(scene, cfg, ch);
        CHECK(!client.handshake());
        CHECK(ch.sent.size() == size_t(cfg.hello_attempts));
        CHECK(ch.now_us() == uint64_t(cfg.hello_attempts) * cfg.hello_timeout_ms * 1000);
    }
    SUBCASE("garbage and foreign messages are skipped, echo still lands") {
        ScriptedChannel ch;
        ch.script.push_back({0xFF, 0xFF});
        ch.script.push_back(encode(WireMessage{MsgType::hello_ack, 777, 0, mine}));
        ch.script.push_back(encode(WireMessage{MsgType::hello_ack, cfg.session_id, 0, mine}));
        ClientSession client(scene, cfg, ch);
        CHECK(client.handshake());
        CHECK(client.stats().decode_errors == 1);
        CHECK(client.stats().ignored_msgs == 1);
    }
}

TEST_CASE("client ingests bitmaps, rejects corrupt ones, falls back cold") {
    const Scene scene = make_sphere_plane_scene(0);
    ClientConfig cfg;
    cfg.width = 32;
    cfg.height = 24;
    const uint8_t nl = uint8_t(scene.lights.size());
    const auto trace = make_orbit_trace(8);
    ScriptedChannel ch;
    ClientSession client(scene, cfg, ch);

    // Frame 0: nothing scripted -> cold-start fallback, shaded fully lit.
    auto [img0, m0] = client.run_frame(trace[0]);
    CHECK(m0.fallback_used);
    CHECK(!m0.bitmap_frame_used);
    CHECK(!m0.staleness);
    const VisibilityBitmap lit = all_visible_bitmap(cfg.width, cfg.height, nl, trace[0].frame_id);
    CHECK(img0 == shade(client.last_gbuffer(), lit, scene.lights, scene.background));

    // Frame 1: a real bitmap arrives in chunks and is used verbatim.
    const VisibilityBitmap v1 = noisy_bitmap(cfg.width, cfg.height, nl, trace[1].frame_id);
    for (auto& d : chunk_datagrams(cfg.session_id, v1, 128)) ch.script.push_back(std::move(d));
    auto [img1, m1] = client.run_frame(trace[1]);
    CHECK(!m1.fallback_used);
    CHECK(*m1.bitmap_frame_used == trace[1].frame_id);
    CHECK(*m1.staleness == 0);
    CHECK(img1 == shade(client.last_gbuffer(), v1, scene.lights, scene.background));

    // Frame 2: a complete frame whose payload does not decompress is dropped,
    // and the previous bitmap covers the frame instead.
    {
        WireMessage bad{MsgType::vis_chunk, cfg.session_id, trace[2].frame_id,
                        VisChunkBody{0, 1, uint32_t(v1.planes.size()), 1, {0x00}}};
        ch.script.push_back(encode(bad));
    }
    auto [img2, m2] = client.run_frame(trace[2]);
    CHECK(client.stats().bad_bitmaps == 1);
    CHECK(*m2.bitmap_frame_used == trace[1].frame_id);
    CHECK(*m2.staleness == 1);
    CHECK(!m2.fallback_used);

    // Frame 3: chunks for someone else's session are not ours to use.
    {
        const VisibilityBitmap foreign =
            noisy_bitmap(cfg.width, cfg.height, nl, trace[3].frame_id);
        for (auto& d : chunk_datagrams(cfg.session_id + 1, foreign, 128))
            ch.script.push_back(std::move(d));
    }
    auto [img3, m3] = client.run_frame(trace[3]);
    CHECK(client.stats().ignored_msgs > 0);
    CHECK(*m3.bitmap_frame_used == trace[1].frame_id);
    CHECK(*m3.staleness == 2);

    // A wrong-size (but well-formed) bitmap payload is also rejected.
    {
        VisibilityBitmap tiny = make_bitmap(8, 8, nl, trace[4].frame_id);
        for (auto& d : chunk_datagrams(cfg.session_id, tiny, 128)) ch.script.push_back(std::move(d));
    }
    auto [img4, m4] = client.run_frame(trace[4]);
    CHECK(client.stats().bad_bitmaps == 2);
    CHECK(*m4.bitmap_frame_used == trace[1].frame_id);
}

TEST_CASE("zero-impairment sim session equals the local pipeline bit for bit") {
    const Scene scene = make_sphere_plane_scene(1);
    const Bvh bvh = build_bvh(scene);
    const auto trace = make_orbit_trace(8);
    ClientConfig cfg;
    cfg.width = 96;
    cfg.height = 72;

    NetConditions cond;  // zero latency, zero loss
    SimNetwork net(cond);
    ServerState server(scene);
    SimChannel ch(net, server);
    ClientSession client(scene, cfg, ch);
    REQUIRE(client.handshake());

    for (const FrameInput& f : trace) {
        auto [img, m] = client.run_frame(f);
        CHECK(img == local_render(scene, bvh, f.camera, cfg.width, cfg.height));
        CHECK(!m.fallback_used);
        CHECK(*m.bitmap_frame_used == f.frame_id);
        CHECK(*m.staleness == 0);
    }
    CHECK(server.stats().frames_rendered == trace.size());
    CHECK(client.stats().decode_errors == 0);
    CHECK(client.stats().bad_bitmaps == 0);
}

TEST_CASE("latency within the deadline only delays, never degrades") {
    const Scene scene = make_sphere_plane_scene(1);
    const Bvh bvh = build_bvh(scene);
    const auto trace = make_orbit_trace(4);
    ClientConfig cfg;
    cfg.width = 64;
    cfg.height = 48;

    NetConditions cond;
    cond.latency_ms = 8.0;  // 16 ms round trip, well under the 33 ms deadline
    SimNetwork net(cond);
    ServerState server(scene);
    SimChannel ch(net, server);
    ClientSession client(scene, cfg, ch);
    REQUIRE(client.handshake());
    for (const FrameInput& f : trace) {
        auto [img, m] = client.run_frame(f);
        CHECK(img == local_render(scene, bvh, f.camera, cfg.width, cfg.height));
        CHECK(*m.staleness == 0);
        CHECK(*m.wait_us >= 16000);  // the wait really happened, in virtual time
    }
}

TEST_CASE("deadline zero means never wait: every frame falls back or reuses") {
    const Scene scene = make_sphere_plane_scene(1);
    const auto trace = make_orbit_trace(5);
    ClientConfig cfg;
    cfg.width = 64;
    cfg.height = 48;
    cfg.deadline_ms = 0;

    NetConditions cond;
    SimNetwork net(cond);
    ServerState server(scene);
    SimChannel ch(net, server);
    ClientSession client(scene, cfg, ch);
    REQUIRE(client.handshake());
    for (const FrameInput& f : trace) {
        auto [img, m] = client.run_frame(f);
        CHECK(m.fallback_used);  // bitmaps exist in flight but are never drained
        CHECK(*m.wait_us == 0);
    }
}

TEST_CASE("total downstream loss freezes the bitmap and staleness climbs") {
    const Scene scene = make_sphere_plane_scene(1);
    const Bvh bvh = build_bvh(scene);
    const auto trace = make_orbit_trace(12);
    ClientConfig cfg;
    cfg.width = 64;
    cfg.height = 48;

    NetConditions cond;
    SimNetwork net(cond);
    ServerState server(scene);
    SimChannel ch(net, server);
    ClientSession client(scene, cfg, ch);
    REQUIRE(client.handshake());

    constexpr uint32_t kLastGood = 5;
    VisibilityBitmap frozen;
    for (const FrameInput& f : trace) {
        if (f.frame_id == kLastGood + 1) {
            NetConditions dead = cond;
            dead.loss_prob = 1.0;
            net.set_conditions(SimNetwork::b_to_a, dead);
        }
        auto [img, m] = client.run_frame(f);
        if (f.frame_id <= kLastGood) {
            CHECK(*m.staleness == 0);
            if (f.frame_id == kLastGood) {
                // Reproduce the server's bitmap for the last delivered frame.
                const Camera cam = session_camera(scene, f.camera);
                frozen = trace_visibility_serial(
                    bvh, rasterize_serial(scene, cam, cfg.width, cfg.height), scene.lights,
                    shadow_epsilon(scene), f.frame_id);
            }
        } else {
            CHECK(!m.fallback_used);
            CHECK(*m.bitmap_frame_used == kLastGood);
            CHECK(*m.staleness == f.frame_id - kLastGood);
            // Current geometry shaded with the frozen frame-5 visibility.
            CHECK(img == shade(client.last_gbuffer(), frozen, scene.lights, scene.background));
        }
    }
    // The server kept rendering; the loss was purely downstream.
    CHECK(server.stats().frames_rendered == trace.size());
}

TEST_CASE("udp loopback session matches the local pipeline") {
    const Scene scene = make_sphere_plane_scene(1);
    const Bvh bvh = build_bvh(scene);
    ClientConfig cfg;
    cfg.width = 64;
    cfg.height = 48;

    UdpEndpoint server_ep("127.0.0.1:0", "");
    std::atomic<bool> stop{false};
    std::thread server_thread([&] {
        ServerState server(scene);
        while (!stop.load()) {
            if (!server_ep.wait_readable_for(5000)) continue;
            for (auto& d : server_ep.poll_receive(0))
                for (auto& reply : server.handle(d, 0)) server_ep.send(reply);
        }
    });

    UdpEndpoint client_ep("127.0.0.1:0",
                          "127.0.0.1:" + std::to_string(server_ep.bound_port()));
    UdpChannel ch(client_ep);
    ClientSession client(scene, cfg, ch);
    const bool ok = client.handshake();
    if (ok) {
        for (const FrameInput& f : make_orbit_trace(3)) {
            auto [img, m] = client.run_frame(f);
            CHECK(img == local_render(scene, bvh, f.camera, cfg.width, cfg.height));
            CHECK(!m.fallback_used);
        }
    }
    stop.store(true);
    server_thread.join();
    CHECK(ok);
}
