#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace protopipe {

// Decoded 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h, int c, std::uint8_t fill = 0);
  Frame(int w, int h, int c, std::vector<std::uint8_t> data);

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const Frame&) const = default;
};

using Bytes = std::vector<std::uint8_t>;

// Binary PGM (P5) / PPM (P6) with maxval 255. Header comments are accepted on
// decode; encode always writes "P5\n<w> <h>\n255\n" followed by the payload.
Frame decode_pnm(std::span<const std::uint8_t> bytes);
Bytes encode_pnm(const Frame& frame);

}  // namespace protopipe
