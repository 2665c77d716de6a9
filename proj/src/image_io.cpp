#include "lfmap/image_io.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <stdexcept>

namespace lfmap {

namespace {

// libpng reports errors through longjmp; these holders make sure the structs
// and the file handle are released when we convert the jump into a throw.
struct PngReader {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriter {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, &info);
    if (fp) std::fclose(fp);
  }
};

void open_for_read(PngReader& r, const std::string& path) {
  r.fp = std::fopen(path.c_str(), "rb");
  if (!r.fp) throw std::runtime_error("cannot open image: " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, r.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw std::runtime_error("not a PNG file: " + path);
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = r.png ? png_create_info_struct(r.png) : nullptr;
  if (!r.png || !r.info) throw std::runtime_error("png allocation failed");
  png_init_io(r.png, r.fp);
  png_set_sig_bytes(r.png, 8);
}

void open_for_write(PngWriter& w, const std::string& path) {
  w.fp = std::fopen(path.c_str(), "wb");
  if (!w.fp) throw std::runtime_error("cannot create image: " + path);
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  w.info = w.png ? png_create_info_struct(w.png) : nullptr;
  if (!w.png || !w.info) throw std::runtime_error("png allocation failed");
  png_init_io(w.png, w.fp);
}

}  // namespace

std::vector<std::uint16_t> read_png_gray16(const std::string& path, int& width,
                                           int& height) {
  PngReader r;
  open_for_read(r, path);
  std::vector<std::uint16_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("corrupt PNG: " + path);

  png_read_info(r.png, r.info);
  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 16)
    throw std::runtime_error("expected 16-bit grayscale PNG: " + path);
  if constexpr (std::endian::native == std::endian::little)
    png_set_swap(r.png);

  pixels.resize(static_cast<std::size_t>(width) * height);
  rows.resize(static_cast<std::size_t>(height));
  for (int v = 0; v < height; ++v)
    rows[static_cast<std::size_t>(v)] =
        reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(v) * width);
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return pixels;
}

void write_png_gray16(const std::string& path, int width, int height,
                      const std::vector<std::uint16_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw std::runtime_error("pixel buffer does not match dimensions");
  PngWriter w;
  open_for_write(w, path);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("png write failed: " + path);

  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  if constexpr (std::endian::native == std::endian::little)
    png_set_swap(w.png);
  for (int v = 0; v < height; ++v)
    rows[static_cast<std::size_t>(v)] = reinterpret_cast<png_bytep>(
        const_cast<std::uint16_t*>(pixels.data() + static_cast<std::size_t>(v) * width));
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

std::vector<std::uint8_t> read_png_rgb8(const std::string& path, int& width,
                                        int& height) {
  PngReader r;
  open_for_read(r, path);
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(r.png)))
    throw std::runtime_error("corrupt PNG: " + path);

  png_read_info(r.png, r.info);
  // Normalize every source layout to tightly packed RGB8.
  png_set_expand(r.png);
  if (png_get_bit_depth(r.png, r.info) == 16) png_set_strip_16(r.png);
  const int color = png_get_color_type(r.png, r.info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));
  if (png_get_rowbytes(r.png, r.info) != static_cast<std::size_t>(width) * 3)
    throw std::runtime_error("unsupported PNG layout: " + path);

  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  rows.resize(static_cast<std::size_t>(height));
  for (int v = 0; v < height; ++v)
    rows[static_cast<std::size_t>(v)] = pixels.data() + static_cast<std::size_t>(v) * width * 3;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return pixels;
}

void write_png_rgb8(const std::string& path, int width, int height,
                    const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw std::runtime_error("pixel buffer does not match dimensions");
  PngWriter w;
  open_for_write(w, path);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(w.png)))
    throw std::runtime_error("png write failed: " + path);

  png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (int v = 0; v < height; ++v)
    rows[static_cast<std::size_t>(v)] =
        const_cast<std::uint8_t*>(rgb.data() + static_cast<std::size_t>(v) * width * 3);
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

}  // namespace lfmap
