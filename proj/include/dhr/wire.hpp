#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "dhr/math.hpp"

namespace dhr {

// Datagram layout (all little-endian, no padding):
//   header:  magic u32 | version u8 | msg_type u8 | session_id u32 | frame_id u32
//   body:    per msg_type below
//   trailer: crc32 u32 over header+body (zlib polynomial)
inline constexpr uint32_t kWireMagic = 0x31524844;  // "DHR1"
inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kHeaderSize = 14;
inline constexpr size_t kCrcSize = 4;

enum class MsgType : uint8_t {
    hello = 1,       // client -> server
    hello_ack = 2,   // server -> client; echoes the hello body, or corrects it to abort
    frame_input = 3, // client -> server
    vis_chunk = 4,   // server -> client
};

// Shared by hello and hello_ack (15 bytes).
struct HelloBody {
    uint16_t width = 0;
    uint16_t height = 0;
    uint8_t n_lights = 0;
    uint64_t scene_hash = 0;
    uint16_t max_payload = 0;
    bool operator==(const HelloBody&) const = default;
};

// 40 bytes. Near plane is a session constant (scene default camera), so it
// does not travel per frame.
struct FrameInputBody {
    uint64_t timestamp_us = 0;
    Vec3 cam_pos;
    Quat cam_quat;
    float vfov_deg = 0;
    bool operator==(const FrameInputBody&) const = default;
};

// 14 bytes + payload (payload_len is explicit on the wire).
struct VisChunkBody {
    uint16_t chunk_index = 0;
    uint16_t chunk_count = 1;
    uint32_t uncompressed_size = 0;
    uint32_t compressed_size = 0;
    std::vector<uint8_t> payload;
    bool operator==(const VisChunkBody&) const = default;
};

struct WireMessage {
    MsgType type = MsgType::hello;
    uint32_t session_id = 0;
    uint32_t frame_id = 0;
    std::variant<HelloBody, FrameInputBody, VisChunkBody> body;
    bool operator==(const WireMessage&) const = default;
};

enum class WireError {
    ok = 0,
    short_datagram,
    bad_magic,
    bad_version,
    bad_msg_type,
    bad_crc,
    bad_length,
};
const char* wire_error_name(WireError e);

uint32_t crc32_ieee(std::span<const uint8_t> data);

// Throws std::length_error if the chunk payload exceeds the u16 field.
std::vector<uint8_t> encode(const WireMessage& msg);

WireError decode(std::span<const uint8_t> datagram, WireMessage& out);

// One compressed visibility payload -> MTU-safe chunk messages. Always at
// least one chunk (an empty payload still announces the frame).
std::vector<WireMessage> split_visibility(uint32_t session_id, uint32_t frame_id,
                                          std::span<const uint8_t> compressed,
                                          uint32_t uncompressed_size, uint16_t max_payload);

// Per-frame chunk reassembly. Order- and duplicate-insensitive; completes a
// frame exactly once; frames at or below the newest completed frame are
// discarded; at most `max_frames` frames buffered (oldest evicted).
class Reassembler {
  public:
    explicit Reassembler(size_t max_frames = 8) : max_frames_(max_frames) {}

    // Feed a decoded vis_chunk. Returns (frame_id, compressed payload) when
    // that chunk completes its frame.
    std::optional<std::pair<uint32_t, std::vector<uint8_t>>> feed(const WireMessage& msg);

    uint64_t discarded_frames() const { return discarded_frames_; }
    size_t pending_frames() const { return pending_.size(); }

  private:
    struct Pending {
        uint16_t chunk_count = 0;
        uint32_t compressed_size = 0;
        uint32_t uncompressed_size = 0;
        size_t received = 0;
        std::vector<std::vector<uint8_t>> parts;
        std::vector<uint8_t> seen;
    };
    std::map<uint32_t, Pending> pending_;
    std::optional<uint32_t> last_completed_;
    size_t max_frames_;
    uint64_t discarded_frames_ = 0;  // inconsistent metadata or size mismatch
};

}  // namespace dhr
