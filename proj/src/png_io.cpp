#include "sonomyo/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "sonomyo/error.hpp"

namespace sonomyo {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; these helpers keep everything with a
// destructor outside the setjmp scope and return false on failure.
bool encode(std::FILE* file, const Frame& frame) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width), static_cast<png_uint_32>(frame.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < frame.height; ++y) {
    png_write_row(png, frame.pixels.data() + static_cast<std::size_t>(y) * frame.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

enum class Decode { ok, failed, not_gray8 };

Decode read_header(png_structp png, png_infop info, std::FILE* file, int& width, int& height) {
  if (setjmp(png_jmpbuf(png))) return Decode::failed;
  png_init_io(png, file);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    return Decode::not_gray8;
  }
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  return Decode::ok;
}

Decode read_rows(png_structp png, std::uint8_t* pixels, int width, int height) {
  if (setjmp(png_jmpbuf(png))) return Decode::failed;
  for (int y = 0; y < height; ++y) png_read_row(png, pixels + static_cast<std::size_t>(y) * width, nullptr);
  png_read_end(png, nullptr);
  return Decode::ok;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Frame& frame) {
  validate(frame);
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  if (!encode(file.get(), frame)) throw IoError("failed to encode " + path.string());
}

Frame read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  Frame frame;
  Decode status = read_header(png, info, file.get(), frame.width, frame.height);
  if (status == Decode::ok) {
    frame.pixels.resize(frame.size());
    status = read_rows(png, frame.pixels.data(), frame.width, frame.height);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (status == Decode::not_gray8) throw IoError(path.string() + ": expected 8-bit grayscale PNG");
  if (status == Decode::failed) throw IoError("failed to decode " + path.string());
  return frame;
}

}  // namespace sonomyo
