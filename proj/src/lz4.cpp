#include "dhr/lz4.hpp"

#include <algorithm>
#include <cstring>

namespace dhr {

std::vector<uint8_t> lz4_compress(std::span<const uint8_t> src) {
    std::vector<uint8_t> out;
    const size_t n = src.size();
    if (n == 0) {
        out.push_back(0x00);  // literals-only sequence of length 0
        return out;
    }
    out.reserve(n + n / 255 + 16);

    auto emit_length = [&](size_t v) {  // extension bytes after a nibble of 15
        while (v >= 255) {
            out.push_back(255);
            v -= 255;
        }
        out.push_back(uint8_t(v));
    };
    // match_len == 0 marks the literals-only terminal sequence.
    auto emit_sequence = [&](size_t lit_start, size_t lit_len, size_t offset, size_t match_len) {
        const uint8_t lit_nib = lit_len >= 15 ? uint8_t(15) : uint8_t(lit_len);
        uint8_t match_nib = 0;
        if (match_len) match_nib = match_len - 4 >= 15 ? uint8_t(15) : uint8_t(match_len - 4);
        out.push_back(uint8_t(lit_nib << 4 | match_nib));
        if (lit_len >= 15) emit_length(lit_len - 15);
        out.insert(out.end(), src.begin() + std::ptrdiff_t(lit_start),
                   src.begin() + std::ptrdiff_t(lit_start + lit_len));
        if (match_len) {
            out.push_back(uint8_t(offset & 0xFF));
            out.push_back(uint8_t(offset >> 8));
            if (match_len - 4 >= 15) emit_length(match_len - 4 - 15);
        }
    };

    size_t anchor = 0;
    if (n >= 13) {  // blocks shorter than 13 bytes are literal-only by format rule
        const size_t match_start_limit = n - 12;  // last match must start 12+ bytes from end
        const size_t match_end_limit = n - 5;     // final 5 bytes stay literals
        std::vector<uint32_t> table(1u << 14, 0xFFFFFFFFu);
        auto load32 = [&](size_t p) {
            uint32_t v;
            std::memcpy(&v, src.data() + p, 4);
            return v;
        };
        auto hash = [](uint32_t x) { return (x * 2654435761u) >> 18; };

        size_t pos = 0;
        while (pos <= match_start_limit) {
            const uint32_t h = hash(load32(pos));
            const uint32_t cand = table[h];
            table[h] = uint32_t(pos);
            if (cand != 0xFFFFFFFFu && pos - cand <= 65535 && load32(cand) == load32(pos)) {
                size_t mlen = 4;
                while (pos + mlen < match_end_limit && src[cand + mlen] == src[pos + mlen])
                    ++mlen;
                emit_sequence(anchor, pos - anchor, pos - cand, mlen);
                pos += mlen;
                anchor = pos;
            } else {
                ++pos;
            }
        }
    }
    emit_sequence(anchor, n - anchor, 0, 0);
    return out;
}

std::vector<uint8_t> lz4_decompress(std::span<const uint8_t> src, uint32_t expected_size) {
    std::vector<uint8_t> out;
    out.reserve(std::min<size_t>(expected_size, size_t(1) << 20));
    const size_t n = src.size();
    size_t ip = 0;

    if (n == 0) {
        if (expected_size != 0) throw Lz4Error("truncated stream");
        return out;
    }

    auto read_ext = [&](size_t base) {
        size_t v = base;
        uint8_t b;
        do {
            if (ip >= n) throw Lz4Error("truncated length");
            b = src[ip++];
            v += b;
            if (v > (size_t(1) << 31)) throw Lz4Error("length overflow");
        } while (b == 255);
        return v;
    };

    while (true) {
        if (ip >= n) throw Lz4Error("truncated stream");
        const uint8_t token = src[ip++];
        size_t lit = token >> 4;
        if (lit == 15) lit = read_ext(15);
        if (lit > n - ip) throw Lz4Error("literal overrun");
        if (lit > expected_size - out.size()) throw Lz4Error("output larger than expected");
        out.insert(out.end(), src.begin() + std::ptrdiff_t(ip),
                   src.begin() + std::ptrdiff_t(ip + lit));
        ip += lit;
        if (ip == n) break;  // literals-only terminal sequence

        if (n - ip < 2) throw Lz4Error("truncated offset");
        const size_t offset = size_t(src[ip]) | size_t(src[ip + 1]) << 8;
        ip += 2;
        if (offset == 0 || offset > out.size()) throw Lz4Error("offset out of range");
        size_t mlen = token & 0x0F;
        if (mlen == 15) mlen = read_ext(15);
        mlen += 4;
        if (mlen > expected_size - out.size()) throw Lz4Error("output larger than expected");
        const size_t from = out.size() - offset;
        for (size_t i = 0; i < mlen; ++i) out.push_back(out[from + i]);  // overlap-correct
    }
    if (out.size() != expected_size) throw Lz4Error("output size mismatch");
    return out;
}

}  // namespace dhr
