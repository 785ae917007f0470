#include "cpgan/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cpgan {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

unsigned char to_byte(float v) {
  v = std::min(1.f, std::max(-1.f, v));
  const float scaled = (v + 1.f) * 0.5f * 255.f;
  return static_cast<unsigned char>(scaled + 0.5f);
}

float to_unit(unsigned char b) { return static_cast<float>(b) / 255.f * 2.f - 1.f; }

}  // namespace

void write_png(const std::string& path, const Tensor<float>& chw, const PngText& text) {
  if (chw.ndim() != 3 || (chw.dim(0) != 3 && chw.dim(0) != 1))
    throw std::invalid_argument("write_png: expected CxHxW tensor with 1 or 3 channels, got " +
                                Tensor<float>::shape_str(chw.shape()));
  const int c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: libpng failure writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  std::vector<png_text> chunks(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    chunks[i] = {};
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = const_cast<char*>(text[i].first.c_str());
    chunks[i].text = const_cast<char*>(text[i].second.c_str());
    chunks[i].text_length = text[i].second.size();
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
  png_write_info(png, info);

  std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) row[static_cast<std::size_t>(x) * c + ch] = to_byte(chw.at(ch, y, x));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);

  unsigned char header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw std::runtime_error("read_png: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: libpng failure reading " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int c = (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  Tensor<float> out({c, h, w});
  std::vector<unsigned char> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = to_unit(row[static_cast<std::size_t>(x) * c + ch]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

PngText read_png_text(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png_text: cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png_text: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png_text: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png_text: libpng failure reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_textp chunks = nullptr;
  int n = 0;
  png_get_text(png, info, &chunks, &n);
  PngText out;
  for (int i = 0; i < n; ++i) out.emplace_back(chunks[i].key, chunks[i].text ? chunks[i].text : "");
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

}  // namespace cpgan
