#include "omniloc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace omniloc {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument("Image: negative dimensions");
  }
  data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

float GrayImage::sample(double x, double y) const {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const float fx = static_cast<float>(x - x0);
  const float fy = static_cast<float>(y - y0);
  const float top = at(x0, y0) * (1.0f - fx) + at(x1, y0) * fx;
  const float bot = at(x0, y1) * (1.0f - fx) + at(x1, y1) * fx;
  return top * (1.0f - fy) + bot * fy;
}

GrayImage to_gray(const Image& img) {
  GrayImage g;
  g.width = img.width();
  g.height = img.height();
  g.data.resize(static_cast<std::size_t>(g.width) * g.height);
  const auto& b = img.bytes();
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    g.data[i] = 0.299f * b[3 * i] + 0.587f * b[3 * i + 1] + 0.114f * b[3 * i + 2];
  }
  return g;
}

Image scale_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& v : out.bytes()) {
    v = static_cast<std::uint8_t>(std::clamp(std::lround(v * factor), 0L, 255L));
  }
  return out;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write image: " + path);
  f << "P6\n" << img.width() << " " << img.height() << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.bytes().data()), static_cast<std::streamsize>(img.bytes().size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

namespace {

// Next header token of a netpbm file, skipping whitespace and comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read image: " + path);
  if (ppm_token(f) != "P6") throw std::runtime_error("not a binary PPM (P6): " + path);
  const int w = std::stoi(ppm_token(f));
  const int h = std::stoi(ppm_token(f));
  const int maxval = std::stoi(ppm_token(f));
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw std::runtime_error("unsupported PPM header: " + path);
  }
  Image img(w, h);
  f.read(reinterpret_cast<char*>(img.bytes().data()), static_cast<std::streamsize>(img.bytes().size()));
  if (f.gcount() != static_cast<std::streamsize>(img.bytes().size())) {
    throw std::runtime_error("truncated PPM: " + path);
  }
  return img;
}

void write_png(const Image& img, const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width());
  pi.height = static_cast<png_uint_32>(img.height());
  pi.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, img.bytes().data(), 0, nullptr)) {
    const std::string msg = pi.message;
    png_image_free(&pi);
    throw std::runtime_error("PNG write failed (" + msg + "): " + path);
  }
}

Image read_png(const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    throw std::runtime_error("PNG read failed (" + std::string(pi.message) + "): " + path);
  }
  pi.format = PNG_FORMAT_RGB;
  Image img(static_cast<int>(pi.width), static_cast<int>(pi.height));
  if (!png_image_finish_read(&pi, nullptr, img.bytes().data(), 0, nullptr)) {
    const std::string msg = pi.message;
    png_image_free(&pi);
    throw std::runtime_error("PNG decode failed (" + msg + "): " + path);
  }
  return img;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

}  // namespace

void write_image(const Image& img, const std::string& path) {
  if (ends_with(path, ".png")) return write_png(img, path);
  if (ends_with(path, ".ppm")) return write_ppm(img, path);
  throw std::invalid_argument("unsupported image extension: " + path);
}

Image read_image(const std::string& path) {
  if (ends_with(path, ".png")) return read_png(path);
  if (ends_with(path, ".ppm")) return read_ppm(path);
  throw std::invalid_argument("unsupported image extension: " + path);
}

}  // namespace omniloc
