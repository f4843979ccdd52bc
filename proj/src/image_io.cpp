#include "scam/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "scam/errors.hpp"

namespace scam {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct DecodedPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<uint8_t> pixels;  // rows, 16-bit samples big-endian as stored
};

DecodedPng decode(const std::string& path, bool expand_palette) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw DataError(path + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  DecodedPng out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if (out.color_type == PNG_COLOR_TYPE_PALETTE && expand_palette) png_set_palette_to_rgb(png);
  if (out.color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  png_read_update_info(png, info);
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const auto rowbytes = png_get_rowbytes(png, info);
  out.pixels.resize(rowbytes * out.height);
  std::vector<png_bytep> rows(out.height);
  for (png_uint_32 y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void encode(const std::string& path, const uint8_t* data, int64_t width, int64_t height,
            int color_type, int bit_depth, int64_t rowbytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + y * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

torch::Tensor read_rgb_png(const std::string& path) {
  auto png = decode(path, true);
  const int64_t h = png.height, w = png.width;
  auto out = torch::empty({h, w, 3}, torch::kUInt8);
  auto* dst = out.data_ptr<uint8_t>();
  const int bytes = png.bit_depth == 16 ? 2 : 1;
  const bool gray = png.channels <= 2;
  for (int64_t i = 0; i < h * w; ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src_c = gray ? 0 : c;
      // 16-bit samples are big-endian; keep the high byte
      dst[i * 3 + c] = png.pixels[(i * png.channels + src_c) * bytes];
    }
  }
  return out;
}

void write_rgb_png(const std::string& path, const torch::Tensor& rgb) {
  if (rgb.dim() != 3 || rgb.size(2) != 3 || rgb.scalar_type() != torch::kUInt8) {
    throw ShapeError("write_rgb_png expects uint8 [H, W, 3]");
  }
  auto c = rgb.contiguous();
  encode(path, c.data_ptr<uint8_t>(), c.size(1), c.size(0), PNG_COLOR_TYPE_RGB, 8,
         c.size(1) * 3);
}

torch::Tensor read_label_png(const std::string& path) {
  auto png = decode(path, false);
  if (png.color_type != PNG_COLOR_TYPE_GRAY || png.channels != 1) {
    throw DataError(path + ": label masks must be single-channel grayscale PNGs");
  }
  const int64_t h = png.height, w = png.width;
  auto out = torch::empty({h, w}, torch::kInt64);
  auto* dst = out.data_ptr<int64_t>();
  for (int64_t i = 0; i < h * w; ++i) {
    dst[i] = png.bit_depth == 16 ? (png.pixels[2 * i] << 8) | png.pixels[2 * i + 1]
                                 : png.pixels[i];
  }
  return out;
}

void write_label_png(const std::string& path, const torch::Tensor& labels) {
  if (labels.dim() != 2) throw ShapeError("write_label_png expects [H, W]");
  auto l = labels.to(torch::kInt64).contiguous();
  const auto lo = l.min().item<int64_t>(), hi = l.max().item<int64_t>();
  if (lo < 0 || hi > 65535) throw DataError("labels must lie in [0, 65535] to be stored as PNG");
  const int64_t h = l.size(0), w = l.size(1);
  const auto* src = l.data_ptr<int64_t>();
  if (hi <= 255) {
    std::vector<uint8_t> buf(h * w);
    for (int64_t i = 0; i < h * w; ++i) buf[i] = static_cast<uint8_t>(src[i]);
    encode(path, buf.data(), w, h, PNG_COLOR_TYPE_GRAY, 8, w);
  } else {
    std::vector<uint8_t> buf(2 * h * w);
    for (int64_t i = 0; i < h * w; ++i) {
      buf[2 * i] = static_cast<uint8_t>(src[i] >> 8);
      buf[2 * i + 1] = static_cast<uint8_t>(src[i] & 0xff);
    }
    encode(path, buf.data(), w, h, PNG_COLOR_TYPE_GRAY, 16, 2 * w);
  }
}

torch::Tensor to_signed_unit(const torch::Tensor& rgb, torch::Dtype dtype) {
  return rgb.permute({2, 0, 1}).to(dtype).div(127.5).sub(1.0).contiguous();
}

torch::Tensor from_signed_unit(const torch::Tensor& image) {
  return image.detach()
      .to(torch::kFloat64)
      .add(1.0)
      .mul(127.5)
      .round()
      .clamp(0, 255)
      .to(torch::kUInt8)
      .permute({1, 2, 0})
      .contiguous();
}

}  // namespace scam
