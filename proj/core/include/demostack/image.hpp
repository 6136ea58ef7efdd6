#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace demostack {

/// 8-bit grayscale frame, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }

    bool operator==(const Image& other) const = default;
};

/// Reads a binary PGM (P5, maxval 255).
Image read_pgm(const std::filesystem::path& path);

/// Writes a binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, const Image& img);

/// Horizontal flip: pixel (x, y) -> (W-1-x, y).
Image flip_horizontal(const Image& img);

/// 2x2 box downsample, floor dimensions.
Image downsample2(const Image& img);

} // namespace demostack
