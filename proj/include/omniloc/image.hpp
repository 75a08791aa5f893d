#pragma once

// 8-bit RGB raster plus portable pixmap / PNG codecs.

#include <cstdint>
#include <string>
#include <vector>

namespace omniloc {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major RGB8 image.
class Image {
public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = index(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  const std::vector<std::uint8_t>& bytes() const { return data_; }
  std::vector<std::uint8_t>& bytes() { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel float image used by the detector.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  /// Bilinear sample with edge clamping.
  float sample(double x, double y) const;
};

GrayImage to_gray(const Image& img);

/// Multiply every channel by `factor`, saturating.
Image scale_brightness(const Image& img, double factor);

void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

/// Dispatches on the extension (.ppm / .png).
void write_image(const Image& img, const std::string& path);
Image read_image(const std::string& path);

}  // namespace omniloc
