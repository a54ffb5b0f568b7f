#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace dhr {

struct Lz4Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// LZ4 *block* format (the wire layer carries sizes and checksums, so the
// frame-format envelope would be redundant). Greedy hash-table encoder;
// output decodes with any conformant decoder.
std::vector<uint8_t> lz4_compress(std::span<const uint8_t> src);

// Total: any input either decodes to exactly `expected_size` bytes or
// throws Lz4Error. Never reads out of bounds.
std::vector<uint8_t> lz4_decompress(std::span<const uint8_t> src, uint32_t expected_size);

}  // namespace dhr
