#include "dhr/wire.hpp"

#include <zlib.h>

#include <algorithm>
#include <stdexcept>

#include "dhr/bytes.hpp"

namespace dhr {

const char* wire_error_name(WireError e) {
    switch (e) {
        case WireError::ok: return "ok";
        case WireError::short_datagram: return "short datagram";
        case WireError::bad_magic: return "bad magic";
        case WireError::bad_version: return "unsupported version";
        case WireError::bad_msg_type: return "unknown msg_type";
        case WireError::bad_crc: return "crc mismatch";
        case WireError::bad_length: return "inconsistent lengths";
    }
    return "?";
}

uint32_t crc32_ieee(std::span<const uint8_t> data) {
    uLong c = crc32(0L, Z_NULL, 0);
    c = crc32(c, data.data(), uInt(data.size()));
    return uint32_t(c);
}

std::vector<uint8_t> encode(const WireMessage& msg) {
    std::vector<uint8_t> out;
    put_u32le(out, kWireMagic);
    put_u8(out, kWireVersion);
    put_u8(out, uint8_t(msg.type));
    put_u32le(out, msg.session_id);
    put_u32le(out, msg.frame_id);

    switch (msg.type) {
        case MsgType::hello:
        case MsgType::hello_ack: {
            const auto& b = std::get<HelloBody>(msg.body);
            put_u16le(out, b.width);
            put_u16le(out, b.height);
            put_u8(out, b.n_lights);
            put_u64le(out, b.scene_hash);
            put_u16le(out, b.max_payload);
            break;
        }
        case MsgType::frame_input: {
            const auto& b = std::get<FrameInputBody>(msg.body);
            put_u64le(out, b.timestamp_us);
            put_f32le(out, b.cam_pos.x);
            put_f32le(out, b.cam_pos.y);
            put_f32le(out, b.cam_pos.z);
            put_f32le(out, b.cam_quat.x);
            put_f32le(out, b.cam_quat.y);
            put_f32le(out, b.cam_quat.z);
            put_f32le(out, b.cam_quat.w);
            put_f32le(out, b.vfov_deg);
            break;
        }
        case MsgType::vis_chunk: {
            const auto& b = std::get<VisChunkBody>(msg.body);
            if (b.payload.size() > 0xFFFF) throw std::length_error("chunk payload too large");
            put_u16le(out, b.chunk_index);
            put_u16le(out, b.chunk_count);
            put_u32le(out, b.uncompressed_size);
            put_u32le(out, b.compressed_size);
            put_u16le(out, uint16_t(b.payload.size()));
            out.insert(out.end(), b.payload.begin(), b.payload.end());
            break;
        }
    }
    put_u32le(out, crc32_ieee(out));
    return out;
}

WireError decode(std::span<const uint8_t> datagram, WireMessage& out) {
    if (datagram.size() < kHeaderSize + kCrcSize) return WireError::short_datagram;

    ByteReader r{datagram};
    uint32_t magic = 0;
    uint8_t version = 0, type = 0;
    r.read_u32le(magic);
    r.read_u8(version);
    r.read_u8(type);
    r.read_u32le(out.session_id);
    r.read_u32le(out.frame_id);
    if (magic != kWireMagic) return WireError::bad_magic;
    if (version != kWireVersion) return WireError::bad_version;
    if (type < 1 || type > 4) return WireError::bad_msg_type;
    out.type = MsgType(type);

    const size_t body_end = datagram.size() - kCrcSize;
    ByteReader crc_r{datagram, body_end};
    uint32_t stated_crc = 0;
    crc_r.read_u32le(stated_crc);
    if (crc32_ieee(datagram.first(body_end)) != stated_crc) return WireError::bad_crc;

    const size_t body_len = body_end - kHeaderSize;
    switch (out.type) {
        case MsgType::hello:
        case MsgType::hello_ack: {
            if (body_len != 15) return WireError::bad_length;
            HelloBody b;
            r.read_u16le(b.width);
            r.read_u16le(b.height);
            r.read_u8(b.n_lights);
            r.read_u64le(b.scene_hash);
            r.read_u16le(b.max_payload);
            out.body = b;
            break;
        }
        case MsgType::frame_input: {
            if (body_len != 40) return WireError::bad_length;
            FrameInputBody b;
            r.read_u64le(b.timestamp_us);
            r.read_f32le(b.cam_pos.x);
            r.read_f32le(b.cam_pos.y);
            r.read_f32le(b.cam_pos.z);
            r.read_f32le(b.cam_quat.x);
            r.read_f32le(b.cam_quat.y);
            r.read_f32le(b.cam_quat.z);
            r.read_f32le(b.cam_quat.w);
            r.read_f32le(b.vfov_deg);
            out.body = b;
            break;
        }
        case MsgType::vis_chunk: {
            if (body_len < 14) return WireError::bad_length;
            VisChunkBody b;
            uint16_t payload_len = 0;
            r.read_u16le(b.chunk_index);
            r.read_u16le(b.chunk_count);
            r.read_u32le(b.uncompressed_size);
            r.read_u32le(b.compressed_size);
            r.read_u16le(payload_len);
            if (body_len != 14 + size_t(payload_len)) return WireError::bad_length;
            if (b.chunk_index >= b.chunk_count) return WireError::bad_length;
            b.payload.assign(datagram.begin() + std::ptrdiff_t(r.pos),
                             datagram.begin() + std::ptrdiff_t(r.pos + payload_len));
            out.body = std::move(b);
            break;
        }
    }
    return WireError::ok;
}

std::vector<WireMessage> split_visibility(uint32_t session_id, uint32_t frame_id,
                                          std::span<const uint8_t> compressed,
                                          uint32_t uncompressed_size, uint16_t max_payload) {
    if (max_payload < 64) throw std::invalid_argument("max_payload < 64");
    const size_t total = compressed.size();
    const size_t count = total == 0 ? 1 : (total + max_payload - 1) / max_payload;
    if (count > 0xFFFF) throw std::length_error("too many chunks");

    std::vector<WireMessage> msgs;
    msgs.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const size_t begin = i * max_payload;
        const size_t len = std::min<size_t>(max_payload, total - begin);
        VisChunkBody b;
        b.chunk_index = uint16_t(i);
        b.chunk_count = uint16_t(count);
        b.uncompressed_size = uncompressed_size;
        b.compressed_size = uint32_t(total);
        b.payload.assign(compressed.begin() + std::ptrdiff_t(begin),
                         compressed.begin() + std::ptrdiff_t(begin + len));
        msgs.push_back(WireMessage{MsgType::vis_chunk, session_id, frame_id, std::move(b)});
    }
    return msgs;
}

std::optional<std::pair<uint32_t, std::vector<uint8_t>>> Reassembler::feed(
    const WireMessage& msg) {
    if (msg.type != MsgType::vis_chunk) return std::nullopt;
    const auto& b = std::get<VisChunkBody>(msg.body);
    const uint32_t fid = msg.frame_id;

    if (last_completed_ && fid <= *last_completed_) return std::nullopt;  // stale

    auto it = pending_.find(fid);
    if (it == pending_.end()) {
        if (pending_.size() >= max_frames_) pending_.erase(pending_.begin());  // oldest
        Pending p;
        p.chunk_count = b.chunk_count;
        p.compressed_size = b.compressed_size;
        p.uncompressed_size = b.uncompressed_size;
        p.parts.resize(b.chunk_count);
        p.seen.assign(b.chunk_count, 0);
        it = pending_.emplace(fid, std::move(p)).first;
    }
    Pending& p = it->second;
    if (p.chunk_count != b.chunk_count || p.compressed_size != b.compressed_size ||
        p.uncompressed_size != b.uncompressed_size) {
        pending_.erase(it);
        ++discarded_frames_;
        return std::nullopt;
    }
    if (b.chunk_index >= p.chunk_count) return std::nullopt;  // decode already rejects this
    if (p.seen[b.chunk_index]) return std::nullopt;            // duplicate
    p.seen[b.chunk_index] = 1;
    p.parts[b.chunk_index] = b.payload;
    ++p.received;
    if (p.received < p.chunk_count) return std::nullopt;

    std::vector<uint8_t> whole;
    whole.reserve(p.compressed_size);
    for (const auto& part : p.parts) whole.insert(whole.end(), part.begin(), part.end());
    const bool size_ok = whole.size() == p.compressed_size;
    pending_.erase(it);
    if (!size_ok) {
        ++discarded_frames_;
        return std::nullopt;
    }
    last_completed_ = fid;
    pending_.erase(pending_.begin(), pending_.upper_bound(fid));
    return std::make_pair(fid, std::move(whole));
}

}  // namespace dhr
