#include "dhr/image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace dhr {

ImageRgb8 make_image(uint16_t width, uint16_t height) {
    ImageRgb8 img;
    img.width = width;
    img.height = height;
    img.pixels.assign(size_t(width) * height * 3, 0);
    return img;
}

std::vector<uint8_t> write_ppm(const ImageRgb8& img) {
    char header[64];
    const int n = std::snprintf(header, sizeof header, "P6\n%u %u\n255\n", unsigned(img.width),
                                unsigned(img.height));
    std::vector<uint8_t> out(header, header + n);
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

void write_ppm_file(const ImageRgb8& img, const std::string& path) {
    const std::vector<uint8_t> bytes = write_ppm(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

ImageRgb8 read_ppm(std::span<const uint8_t> data) {
    // Exactly the canonical form write_ppm emits; a byte-counting sscanf
    // would swallow whitespace-valued leading pixel bytes.
    size_t pos = 0;
    auto expect = [&](char c) {
        if (pos >= data.size() || data[pos] != uint8_t(c))
            throw std::runtime_error("not a canonical P6 ppm");
        ++pos;
    };
    auto number = [&]() {
        if (pos >= data.size() || data[pos] < '0' || data[pos] > '9')
            throw std::runtime_error("not a canonical P6 ppm");
        unsigned long v = 0;
        while (pos < data.size() && data[pos] >= '0' && data[pos] <= '9') {
            v = v * 10 + (data[pos] - '0');
            if (v > 65535) throw std::runtime_error("ppm dimension too large");
            ++pos;
        }
        return unsigned(v);
    };
    expect('P');
    expect('6');
    expect('\n');
    const unsigned w = number();
    expect(' ');
    const unsigned h = number();
    expect('\n');
    if (number() != 255) throw std::runtime_error("not a P6/255 ppm");
    expect('\n');
    const size_t body = size_t(w) * h * 3;
    if (data.size() != pos + body) throw std::runtime_error("ppm size mismatch");
    ImageRgb8 img = make_image(uint16_t(w), uint16_t(h));
    std::copy(data.begin() + std::ptrdiff_t(pos), data.end(), img.pixels.begin());
    return img;
}

ImageRgb8 read_ppm_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return read_ppm(bytes);
}

}  // namespace dhr
