// Copyright 2026 The lipger Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>

#include "lipger/common.hpp"
#include "lipger/lip_encoder.hpp"

namespace lipger {

namespace fs = std::filesystem;

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::vector<unsigned char> read_png_gray(const std::string& path, int& h, int& w) {
  FilePtr f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw DataError("cannot open PNG " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("libpng initialisation failed");
  }
  std::vector<unsigned char> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("malformed PNG " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("PNG " + path + " is not 8-bit grayscale");
  }
  w = static_cast<int>(png_get_image_width(png, info));
  h = static_cast<int>(png_get_image_height(png, info));
  pixels.resize(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * w;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

void write_png_gray(const std::string& path, const unsigned char* data, int h, int w) {
  FilePtr f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw DataError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw DataError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed for " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

RoiSequence read_roi_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open ROI file " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw DataError("ROI file " + path + " is truncated (no header)");
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  RoiSequence r;
  r.frames = static_cast<int>(rd_u32(b));
  r.height = static_cast<int>(rd_u32(b + 4));
  r.width = static_cast<int>(rd_u32(b + 8));
  const std::size_t n = static_cast<std::size_t>(r.frames) * r.height * r.width;
  if (r.frames < 1 || r.height < 1 || r.width < 1) throw DataError("ROI file " + path + " has an empty shape");
  if (bytes.size() != 12 + n)
    throw DataError("ROI file " + path + " holds " + std::to_string(bytes.size() - 12) + " pixel bytes, header says " +
                    std::to_string(n));
  r.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.pixels[i] = b[12 + i] / 255.0;
  return r;
}

void write_roi_raw(const std::string& path, const RoiSequence& rois) {
  rois.validate();
  std::string out;
  for (int v : {rois.frames, rois.height, rois.width})
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff));
  for (double p : rois.pixels) out.push_back(static_cast<char>(to_byte(p)));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

RoiSequence read_roi_png_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("ROI directory " + dir + " does not exist");
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("ROI directory " + dir + " holds no PNG frames");
  RoiSequence r;
  for (const auto& f : files) {
    int h = 0, w = 0;
    const auto px = read_png_gray(f, h, w);
    if (r.frames == 0) {
      r.height = h;
      r.width = w;
    } else if (h != r.height || w != r.width) {
      throw DataError("ROI frame " + f + " is " + std::to_string(h) + "x" + std::to_string(w) + ", expected " +
                      std::to_string(r.height) + "x" + std::to_string(r.width));
    }
    for (unsigned char p : px) r.pixels.push_back(p / 255.0);
    ++r.frames;
  }
  return r;
}

void write_roi_png_dir(const std::string& dir, const RoiSequence& rois) {
  rois.validate();
  fs::create_directories(dir);
  std::vector<unsigned char> frame(static_cast<std::size_t>(rois.height) * rois.width);
  for (int m = 0; m < rois.frames; ++m) {
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = to_byte(rois.pixels[m * frame.size() + i]);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.png", m);
    write_png_gray((fs::path(dir) / name).string(), frame.data(), rois.height, rois.width);
  }
}

RoiSequence read_roi(const std::string& ref, const std::string& format) {
  if (format == "raw") return read_roi_raw(ref);
  if (format == "png") return read_roi_png_dir(ref);
  throw DataError("unknown ROI format '" + format + "' for " + ref);
}

}  // namespace lipger
