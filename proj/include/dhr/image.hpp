#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dhr {

struct ImageRgb8 {
    uint16_t width = 0;
    uint16_t height = 0;
    std::vector<uint8_t> pixels;  // 3 bytes per pixel, row-major, top-to-bottom

    size_t index(uint16_t x, uint16_t y) const { return (size_t(y) * width + x) * 3; }
    bool operator==(const ImageRgb8&) const = default;
};

ImageRgb8 make_image(uint16_t width, uint16_t height);

// Binary PPM: "P6\n<w> <h>\n255\n" + RGB bytes. Bit-exact, so images diff
// with plain file comparison.
std::vector<uint8_t> write_ppm(const ImageRgb8& img);
void write_ppm_file(const ImageRgb8& img, const std::string& path);

// Strict parser for files this project wrote (test/oracle readback).
ImageRgb8 read_ppm(std::span<const uint8_t> data);
ImageRgb8 read_ppm_file(const std::string& path);

}  // namespace dhr
