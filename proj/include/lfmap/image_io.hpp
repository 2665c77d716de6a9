#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lfmap {

/// 16-bit grayscale PNG, row-major, native byte order in memory (the file is
/// big-endian per the PNG spec). Throws std::runtime_error on a missing file
/// or malformed data.
std::vector<std::uint16_t> read_png_gray16(const std::string& path, int& width,
                                           int& height);
void write_png_gray16(const std::string& path, int width, int height,
                      const std::vector<std::uint16_t>& pixels);

/// 8-bit RGB PNG, tightly packed rows. Palette, grayscale, 16-bit, and
/// alpha-carrying sources are normalized to RGB8 on read.
std::vector<std::uint8_t> read_png_rgb8(const std::string& path, int& width,
                                        int& height);
void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb);

}  // namespace lfmap
