#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>

#include "gsvi/errors.hpp"

namespace gsvi {

using PixelArray = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Single-channel luminance raster, values in [0, 1], row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0)
      : pixels_(PixelArray::Constant(check(height), check(width), std::clamp(fill, 0.0, 1.0))) {}
  explicit GrayImage(PixelArray pixels) : pixels_(std::move(pixels)) {
    pixels_ = pixels_.max(0.0).min(1.0);
  }

  int width() const { return static_cast<int>(pixels_.cols()); }
  int height() const { return static_cast<int>(pixels_.rows()); }
  Eigen::Index size() const { return pixels_.size(); }
  bool empty() const { return pixels_.size() == 0; }

  double operator()(int row, int col) const { return pixels_(row, col); }
  void set(int row, int col, double v) { pixels_(row, col) = std::clamp(v, 0.0, 1.0); }

  const PixelArray& pixels() const { return pixels_; }

  GrayImage crop(int row, int col, int height, int width) const {
    if (row < 0 || col < 0 || row + height > this->height() || col + width > this->width())
      throw DimensionError("crop window outside image");
    return GrayImage(PixelArray(pixels_.block(row, col, height, width)));
  }

 private:
  static int check(int extent) {
    if (extent < 0) throw DimensionError("negative image extent");
    return extent;
  }
  PixelArray pixels_;
};

}  // namespace gsvi
