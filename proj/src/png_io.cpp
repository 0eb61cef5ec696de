#include "rbl/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "rbl/error.hpp"

namespace rbl::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    if (mode[0] == 'r') throw Error(ErrorKind::MissingFile, "cannot open " + path.string(), path.string());
    throw Error(ErrorKind::Io, "cannot write " + path.string(), path.string());
  }
  return f;
}

struct DecodedImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// libpng reports errors by longjmp; keep C++ objects with destructors out of these frames.
bool decode_raw(std::FILE* f, DecodedImage* out) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  png_bytep* rows = nullptr;
  if (!info || setjmp(png_jmpbuf(png))) {
    std::free(rows);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out->width = static_cast<int>(png_get_image_width(png, info));
  out->height = static_cast<int>(png_get_image_height(png, info));
  out->channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out->pixels.resize(stride * out->height);
  rows = static_cast<png_bytep*>(std::malloc(sizeof(png_bytep) * out->height));
  for (int y = 0; y < out->height; ++y) rows[y] = out->pixels.data() + y * stride;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  std::free(rows);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

DecodedImage decode(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw Error(ErrorKind::Io, path.string() + " is not a PNG file", path.string());
  }
  DecodedImage out;
  if (!decode_raw(f.get(), &out)) {
    throw Error(ErrorKind::Io, path.string() + ": corrupt PNG", path.string());
  }
  return out;
}

bool encode_raw(std::FILE* f, int width, int height, int color_type, int channels,
                const std::uint8_t* pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, f);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void encode(const std::filesystem::path& path, int width, int height, int color_type, int channels,
            const std::vector<std::uint8_t>& pixels) {
  FilePtr f = open_file(path, "wb");
  if (!encode_raw(f.get(), width, height, color_type, channels, pixels.data())) {
    throw Error(ErrorKind::Io, "failed to encode " + path.string(), path.string());
  }
}

}  // namespace

void Rgb8::put(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (!in_bounds(x, y)) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

Gray8 read_gray(const std::filesystem::path& path) {
  DecodedImage d = decode(path);
  Gray8 out{d.width, d.height, {}};
  out.pixels.resize(static_cast<std::size_t>(d.width) * d.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = d.pixels[i * d.channels];
  return out;
}

Rgb8 read_rgb(const std::filesystem::path& path) {
  DecodedImage d = decode(path);
  Rgb8 out(d.width, d.height);
  for (std::size_t i = 0; i < static_cast<std::size_t>(d.width) * d.height; ++i) {
    for (int c = 0; c < 3; ++c) {
      out.pixels[i * 3 + c] = d.pixels[i * d.channels + (d.channels >= 3 ? c : 0)];
    }
  }
  return out;
}

void write_gray(const std::filesystem::path& path, const Gray8& image) {
  encode(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 1, image.pixels);
}

void write_rgb(const std::filesystem::path& path, const Rgb8& image) {
  encode(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.pixels);
}

BinaryMask read_binary_mask(const std::filesystem::path& path) {
  Gray8 g = read_gray(path);
  return BinaryMask(g.width, g.height, std::move(g.pixels));
}

void write_binary_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Gray8 g{mask.width(), mask.height(), {}};
  g.pixels.reserve(mask.size());
  for (auto b : mask.bits()) g.pixels.push_back(b ? 255 : 0);
  write_gray(path, g);
}

ToothLabelMask read_label_mask(const std::filesystem::path& path) {
  Gray8 g = read_gray(path);
  return ToothLabelMask(g.width, g.height, std::move(g.pixels));
}

void write_label_mask(const std::filesystem::path& path, const ToothLabelMask& mask) {
  Gray8 g{mask.width(), mask.height(), {mask.labels().begin(), mask.labels().end()}};
  write_gray(path, g);
}

}  // namespace rbl::png
