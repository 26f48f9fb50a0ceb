#pragma once
// 8-bit image files: PNG (libpng) and binary PPM.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace fregan::io {

struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Decodes any PNG color type / depth to 8-bit RGB.
Image8 read_png(const std::filesystem::path& path);
// P6 with maxval ≤ 255.
Image8 read_ppm(const std::filesystem::path& path);
// Dispatches on extension (.png, .ppm).
Image8 read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const Image8& image);

// [-1,1] → [0,255], rounded, clamped.
std::uint8_t to_byte(float v);
float from_byte(std::uint8_t b);

}  // namespace fregan::io
