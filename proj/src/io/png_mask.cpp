#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "labelprop/errors.hpp"
#include "labelprop/io.hpp"

namespace labelprop::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorState {
  char message[256] = {};
};

void on_error(png_structp png, png_const_charp msg) {
  auto* state = static_cast<ErrorState*>(png_get_error_ptr(png));
  std::snprintf(state->message, sizeof state->message, "%s", msg);
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

// Kept free of C++ objects so the longjmp out of libpng skips no destructor.
bool encode_palette_png(std::FILE* file, ErrorState& err, std::size_t width, std::size_t height,
                        const png_color* colors, std::size_t ncolors, png_bytep* rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (png == nullptr) return false;
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_PLTE(png, info, colors, static_cast<int>(ncolors));
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Palette davis_palette() {
  // PASCAL VOC colour map: bits of the index spread over the high bits of R, G, B.
  Palette p(256);
  for (std::size_t i = 0; i < 256; ++i) {
    std::uint8_t r = 0, g = 0, b = 0;
    std::size_t c = i;
    for (int j = 0; j < 8; ++j) {
      r = static_cast<std::uint8_t>(r | (((c >> 0) & 1U) << (7 - j)));
      g = static_cast<std::uint8_t>(g | (((c >> 1) & 1U) << (7 - j)));
      b = static_cast<std::uint8_t>(b | (((c >> 2) & 1U) << (7 - j)));
      c >>= 3;
    }
    p[i] = {r, g, b};
  }
  return p;
}

ClassMap read_mask(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError(path.string() + ": cannot open mask");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(path.string() + ": not a PNG file");

  ErrorState err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (png == nullptr) throw FormatError(path.string() + ": libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError(path.string() + ": libpng initialisation failed");
  }

  // Heap buffers are owned by objects created before setjmp, so a longjmp skips no destructor.
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  const auto pixels = std::make_unique<std::vector<std::uint8_t>>();
  const auto rows = std::make_unique<std::vector<png_bytep>>();
  const char* volatile bad_layout = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": malformed PNG (" + err.message + ")");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_PALETTE && color_type != PNG_COLOR_TYPE_GRAY)
    bad_layout = "mask must be palette-indexed or 8-bit grayscale";
  else if (bit_depth > 8)
    bad_layout = "mask bit depth above 8 is not supported";
  if (bad_layout == nullptr) {
    if (bit_depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    pixels->resize(static_cast<std::size_t>(width) * height);
    rows->resize(height);
    for (png_uint_32 y = 0; y < height; ++y) (*rows)[y] = pixels->data() + static_cast<std::size_t>(y) * width;
    png_read_image(png, rows->data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (bad_layout != nullptr) throw FormatError(path.string() + ": " + bad_layout);

  ClassMap map(height, width);
  for (std::size_t i = 0; i < pixels->size(); ++i) map.ids[i] = (*pixels)[i];
  return map;
}

void write_mask(const ClassMap& map, const fs::path& path, const Palette& palette) {
  if (map.height == 0 || map.width == 0) throw DataError(path.string() + ": empty mask");
  if (palette.empty() || palette.size() > 256) throw DataError(path.string() + ": palette must have 1..256 entries");
  std::vector<std::uint8_t> pixels(map.ids.size());
  for (std::size_t i = 0; i < map.ids.size(); ++i) {
    const auto id = map.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= palette.size())
      throw DataError(path.string() + ": class id " + std::to_string(id) + " does not fit an 8-bit palette");
    pixels[i] = static_cast<std::uint8_t>(id);
  }
  std::vector<png_color> colors(palette.size());
  for (std::size_t i = 0; i < palette.size(); ++i) colors[i] = {palette[i][0], palette[i][1], palette[i][2]};
  std::vector<png_bytep> rows(map.height);
  for (std::size_t y = 0; y < map.height; ++y) rows[y] = pixels.data() + y * map.width;

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw DataError(path.string() + ": cannot open for writing");
  ErrorState err;
  if (!encode_palette_png(file.get(), err, map.width, map.height, colors.data(), colors.size(), rows.data()))
    throw DataError(path.string() + ": PNG encoding failed (" + err.message + ")");
}

}  // namespace labelprop::io
