#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsvi/graph.hpp"
#include "gsvi/gray_image.hpp"
#include "gsvi/linalg.hpp"

namespace gsvi {

// --- PGM -------------------------------------------------------------------

/// Parses binary (P5) or ASCII (P2) graymaps with maxval up to 65535.
/// Samples are divided by maxval. Errors carry the byte offset.
GrayImage read_pgm(std::string_view bytes);
/// Emits P5 with maxval 255, rounding half away from zero.
std::string write_pgm(const GrayImage& img);

GrayImage read_pgm_file(const std::string& path);
void write_pgm_file(const std::string& path, const GrayImage& img);

// --- masking ---------------------------------------------------------------

struct MaskedImage {
  Vec y;  // observed samples in m_index order
  PixelPartition part;
};

MaskedImage apply_checkerboard_mask(const GrayImage& img);

/// Observed pixels copied from y, missing pixels from Theta y.
GrayImage baseline_interpolate(const Vec& y, const PixelPartition& part,
                               const BaseInterpolator& theta);

// --- patches ---------------------------------------------------------------

struct PatchGrid {
  int patch_size = 64;
  int stride = 48;

  void validate() const;
  /// Separable raised-cosine weight of pixel (row, col) inside a patch. Always > 0.
  double weight(int row, int col) const;
  /// Top-left patch offsets along one axis; the last one is flush with the border.
  std::vector<int> offsets(int extent) const;
};

struct PatchPosition {
  int row = 0;
  int col = 0;
  friend bool operator==(const PatchPosition&, const PatchPosition&) = default;
};

std::vector<PatchPosition> patch_positions(int width, int height, const PatchGrid& grid);

std::vector<GrayImage> extract_patches(const GrayImage& img, const PatchGrid& grid,
                                       std::vector<PatchPosition>* positions = nullptr);

/// Weighted average of overlapping patches; each output pixel is
/// sum(w * value) / sum(w) over the patches covering it.
GrayImage fuse_patches(const std::vector<GrayImage>& patches,
                       const std::vector<PatchPosition>& positions, const PatchGrid& grid,
                       int width, int height);

// --- metrics ---------------------------------------------------------------

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) for [0, 1] images; identical images report kPsnrCap.
double psnr(const GrayImage& a, const GrayImage& b);
double mse(const GrayImage& a, const GrayImage& b);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows, K1 = 0.01,
/// K2 = 0.03, dynamic range 1.
double ssim(const GrayImage& a, const GrayImage& b);

}  // namespace gsvi
