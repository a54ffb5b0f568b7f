#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dhr/lz4.hpp"
#include "dhr/visibility.hpp"

namespace dhr {

// Planes concatenated in light order, no header (dimensions travel in the
// wire layer). Length = n_lights * ceil(w*h/8).
std::vector<uint8_t> pack_bitmap(const VisibilityBitmap& vis);

// Inverse of pack_bitmap; throws Lz4Error-free std::invalid_argument on a
// length mismatch.
VisibilityBitmap unpack_bitmap(std::span<const uint8_t> data, uint16_t width, uint16_t height,
                               uint8_t n_lights, uint32_t frame_id);

}  // namespace dhr
