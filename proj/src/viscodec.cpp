#include "dhr/viscodec.hpp"

#include <stdexcept>

namespace dhr {

std::vector<uint8_t> pack_bitmap(const VisibilityBitmap& vis) {
    return vis.planes;  // storage is already the wire layout
}

VisibilityBitmap unpack_bitmap(std::span<const uint8_t> data, uint16_t width, uint16_t height,
                               uint8_t n_lights, uint32_t frame_id) {
    VisibilityBitmap vis = make_bitmap(width, height, n_lights, frame_id);
    if (data.size() != vis.planes.size())
        throw std::invalid_argument("packed bitmap length mismatch");
    vis.planes.assign(data.begin(), data.end());
    return vis;
}

}  // namespace dhr
