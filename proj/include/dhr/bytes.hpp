#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

namespace dhr {

// Little-endian byte packing shared by the scene hash and the wire codec.

inline void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

inline void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
}

inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_f32le(std::vector<uint8_t>& out, float v) {
    put_u32le(out, std::bit_cast<uint32_t>(v));
}

// Cursor over a datagram; reads fail (return false) instead of overrunning.
struct ByteReader {
    std::span<const uint8_t> data;
    size_t pos = 0;

    size_t remaining() const { return data.size() - pos; }

    bool read_u8(uint8_t& v) {
        if (remaining() < 1) return false;
        v = data[pos++];
        return true;
    }
    bool read_u16le(uint16_t& v) {
        if (remaining() < 2) return false;
        v = uint16_t(data[pos]) | uint16_t(data[pos + 1]) << 8;
        pos += 2;
        return true;
    }
    bool read_u32le(uint32_t& v) {
        if (remaining() < 4) return false;
        v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(data[pos + i]) << (8 * i);
        pos += 4;
        return true;
    }
    bool read_u64le(uint64_t& v) {
        if (remaining() < 8) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(data[pos + i]) << (8 * i);
        pos += 8;
        return true;
    }
    bool read_f32le(float& v) {
        uint32_t bits;
        if (!read_u32le(bits)) return false;
        v = std::bit_cast<float>(bits);
        return true;
    }
};

constexpr uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t h = kFnvOffsetBasis) {
    for (uint8_t b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

}  // namespace dhr
