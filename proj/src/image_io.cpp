// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "biqa/error.hpp"
#include "biqa/imageops.hpp"

namespace biqa {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> to_bytes(const RasterImage& image) {
  std::vector<std::uint8_t> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(image.pixels[i]), 0.0f, 255.0f));
  }
  return bytes;
}

RasterImage read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path.string() + ": " + png.message);
  }
  RasterImage out(static_cast<int>(png.width), static_cast<int>(png.height));
  std::transform(buffer.begin(), buffer.end(), out.pixels.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}
void put16(std::vector<std::uint8_t>& b, std::size_t at, std::uint16_t v) {
  b[at] = static_cast<std::uint8_t>(v);
  b[at + 1] = static_cast<std::uint8_t>(v >> 8);
}

RasterImage read_bmp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), {});
  if (data.size() < 54 || data[0] != 'B' || data[1] != 'M') {
    throw DataError("not a BMP file: " + path.string());
  }
  const std::uint32_t offset = le32(&data[10]);
  const std::int32_t w = static_cast<std::int32_t>(le32(&data[18]));
  const std::int32_t raw_h = static_cast<std::int32_t>(le32(&data[22]));
  const std::uint16_t bpp = le16(&data[28]);
  const std::uint32_t compression = le32(&data[30]);
  if ((bpp != 24 && bpp != 32) || (compression != 0 && compression != 3) || w <= 0 ||
      raw_h == 0) {
    throw DataError("unsupported BMP variant (only uncompressed 24/32-bit): " + path.string());
  }
  const bool top_down = raw_h < 0;
  const int h = std::abs(raw_h);
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (static_cast<std::size_t>(w) * bytes_pp + 3) & ~std::size_t{3};
  if (offset + stride * h > data.size()) throw DataError("truncated BMP: " + path.string());
  RasterImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int src_row = top_down ? y : h - 1 - y;
    const std::uint8_t* row = &data[offset + stride * src_row];
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* px = row + x * bytes_pp;
      out.at(x, y, 0) = px[2];
      out.at(x, y, 1) = px[1];
      out.at(x, y, 2) = px[0];
    }
  }
  return out;
}

}  // namespace

RasterImage read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() >= 8 && static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P' &&
      magic[2] == 'N' && magic[3] == 'G') {
    return read_png(path);
  }
  if (in.gcount() >= 2 && magic[0] == 'B' && magic[1] == 'M') return read_bmp(path);
  throw DataError("unsupported image format (PNG or BMP only): " + path.string());
}

void write_png(const RasterImage& image, const fs::path& path) {
  if (image.empty()) throw DataError("cannot write an empty image");
  const auto bytes = to_bytes(image);
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

void write_bmp(const RasterImage& image, const fs::path& path) {
  if (image.empty()) throw DataError("cannot write an empty image");
  const auto bytes = to_bytes(image);
  const std::size_t stride = (static_cast<std::size_t>(image.width) * 3 + 3) & ~std::size_t{3};
  const std::size_t size = 54 + stride * image.height;
  std::vector<std::uint8_t> out(size, 0);
  out[0] = 'B';
  out[1] = 'M';
  put32(out, 2, static_cast<std::uint32_t>(size));
  put32(out, 10, 54);
  put32(out, 14, 40);
  put32(out, 18, static_cast<std::uint32_t>(image.width));
  put32(out, 22, static_cast<std::uint32_t>(image.height));
  put16(out, 26, 1);
  put16(out, 28, 24);
  put32(out, 34, static_cast<std::uint32_t>(stride * image.height));
  for (int y = 0; y < image.height; ++y) {
    std::uint8_t* row = &out[54 + stride * (image.height - 1 - y)];
    for (int x = 0; x < image.width; ++x) {
      const std::size_t i = image.index(x, y, 0);
      row[3 * x] = bytes[i + 2];
      row[3 * x + 1] = bytes[i + 1];
      row[3 * x + 2] = bytes[i];
    }
  }
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("cannot write BMP " + path.string());
}

}  // namespace biqa
