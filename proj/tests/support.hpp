#pragma once

// Shared fixtures. Oracles here use Eigen's own decompositions so they do not
// share code with the solvers under test.

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "gsvi/graph.hpp"
#include "gsvi/gray_image.hpp"

namespace testing {

using gsvi::Mat;
using gsvi::Vec;

inline Vec oracle_solve(const Mat& a, const Vec& b) {
  return Eigen::MatrixXd(a).fullPivLu().solve(Eigen::VectorXd(b));
}

inline double rel_err(const Vec& got, const Vec& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

inline Mat dense(const gsvi::SpMat& m) { return Mat(m.toDense()); }

/// Low-frequency image in [0.1, 0.9].
inline gsvi::GrayImage smooth_image(int width, int height, double phase = 0.0) {
  gsvi::PixelArray px(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      px(r, c) = 0.5 + 0.25 * std::sin(0.07 * r + phase) * std::cos(0.05 * c - phase) +
                 0.1 * std::cos(0.03 * (r + c));
  return gsvi::GrayImage(px);
}

/// Linear ramp, the case bilinear interpolation reproduces almost exactly.
inline gsvi::GrayImage gradient_image(int width, int height) {
  gsvi::PixelArray px(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      px(r, c) = 0.1 + 0.8 * (0.6 * r / (height - 1.0) + 0.4 * c / (width - 1.0));
  return gsvi::GrayImage(px);
}

/// Textured image: smooth content, edges and mild noise, quantized to 8 bits.
inline gsvi::GrayImage textured_image(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  gsvi::PixelArray px(size, size);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      double v = 0.45 + 0.2 * std::sin(0.045 * r) * std::cos(0.06 * c);
      if ((r / 40 + c / 56) % 2) v += 0.2;
      if ((r - size / 2) * (r - size / 2) + (c - size / 3) * (c - size / 3) < size * size / 25)
        v -= 0.25;
      v += noise(rng);
      px(r, c) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
  return gsvi::GrayImage(px);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gsvi_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
