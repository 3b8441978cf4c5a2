#include "urbanfn/render.hpp"

#include <png.h>

#include <csetjmp>
#include <cmath>
#include <sstream>

#include "urbanfn/error.hpp"
#include "urbanfn/io.hpp"

namespace urbanfn {

Palette Palette::defaults() {
  return {{{
              {0, 0, 0},        // background
              {230, 85, 70},    // residential
              {60, 120, 220},   // commercial
              {245, 200, 40},   // public service
              {250, 250, 250},  // public health
              {70, 190, 90},    // sport and art
              {170, 90, 200},   // educational
              {130, 130, 130},  // industrial
          }},
          {255, 0, 255}};
}

const Rgb& Palette::color(int code) const {
  if (code == 255) return unlabeled;
  if (code < 0 || code > 7) throw DataError("palette has no color for value " + std::to_string(code));
  return classes[std::size_t(code)];
}

Image render_map(const RasterGrid& map, const Palette& palette, bool legend) {
  if (map.bands() != 1) throw DataError("render_map: expected a single-band raster");
  const int w = map.width(), h = map.height();
  const int strip = legend ? std::max(8, h / 16) : 0;
  Image img{w, h + strip, std::vector<std::uint8_t>(std::size_t(w) * std::size_t(h + strip) * 3, 0)};
  for (std::size_t i = 0; i < map.pixels(); ++i) {
    const float v = map.data()[i];
    const int code = int(v);
    if (!std::isfinite(v) || float(code) != v || !(code == 255 || (code >= 0 && code <= 7))) {
      std::ostringstream msg;
      msg << "render_map: value " << v << " is outside the palette domain";
      throw DataError(msg.str());
    }
    const Rgb& c = palette.color(code);
    std::copy(c.begin(), c.end(), img.rgb.begin() + std::ptrdiff_t(i * 3));
  }
  if (legend) {
    for (int y = h; y < h + strip; ++y)
      for (int x = 0; x < w; ++x) {
        const int slot = x * 9 / std::max(w, 1);
        const Rgb& c = slot < 8 ? palette.classes[std::size_t(slot)] : palette.unlabeled;
        std::copy(c.begin(), c.end(), img.rgb.begin() + (std::ptrdiff_t(y) * w + x) * 3);
      }
  }
  return img;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

// libpng reports errors by longjmp; no C++ object with a destructor lives in this frame.
bool encode_rows(png_structp png, png_infop info, const Image& img, std::string* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, out, png_append, nullptr);
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    png_write_row(png, img.rgb.data() + std::size_t(y) * std::size_t(img.width) * 3);
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

std::string encode_png(const Image& img) {
  if (img.width <= 0 || img.height <= 0) throw DataError("encode_png: empty image");
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  const bool ok = info && encode_rows(png, info, img, &out);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw DataError("png: encoding failed");
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  write_file_atomic(path, encode_png(img));
}

}  // namespace urbanfn
