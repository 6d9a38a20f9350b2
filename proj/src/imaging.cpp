#include "gsvi/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

namespace gsvi {

namespace {

class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char ch = static_cast<unsigned char>(bytes_[pos_]);
      if (std::isspace(ch)) {
        ++pos_;
      } else if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000) throw ParseError(std::string("pgm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("pgm: expected ") + what, start);
    return value;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_;
};

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size * size));
  const double c = (size - 1) / 2.0;
  double total = 0.0;
  for (int r = 0; r < size; ++r)
    for (int k = 0; k < size; ++k) {
      const double v = std::exp(-((r - c) * (r - c) + (k - c) * (k - c)) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(r * size + k)] = v;
      total += v;
    }
  for (double& v : w) v /= total;
  return w;
}

void require_same_size(const GrayImage& a, const GrayImage& b, const char* who) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimensionError(std::string(who) + ": images are " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " and " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()));
}

}  // namespace

GrayImage read_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    throw ParseError("pgm: expected magic P5 or P2", 0);
  const bool binary = bytes[1] == '5';
  HeaderReader in(bytes, 2);
  const long width = in.number("width");
  const long height = in.number("height");
  const long maxval = in.number("maxval");
  if (width <= 0 || height <= 0) throw ParseError("pgm: empty image", in.pos());
  if (maxval <= 0 || maxval > 65535) throw ParseError("pgm: maxval out of range", in.pos());

  PixelArray px(height, width);
  const double denom = static_cast<double>(maxval);
  if (binary) {
    if (in.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[in.pos()])))
      throw ParseError("pgm: expected whitespace after header", in.pos());
    const std::size_t data = in.pos() + 1;
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                             sample_bytes;
    if (bytes.size() - data < need) throw ParseError("pgm: truncated payload", bytes.size());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + data);
    for (long r = 0; r < height; ++r)
      for (long c = 0; c < width; ++c) {
        unsigned v = *p++;
        if (sample_bytes == 2) v = (v << 8) | *p++;
        if (v > static_cast<unsigned>(maxval))
          throw ParseError("pgm: sample exceeds maxval",
                           static_cast<std::size_t>(p - reinterpret_cast<const unsigned char*>(
                                                            bytes.data())) - sample_bytes);
        px(r, c) = v / denom;
      }
  } else {
    for (long r = 0; r < height; ++r)
      for (long c = 0; c < width; ++c) {
        const long v = in.number("sample");
        if (v > maxval) throw ParseError("pgm: sample exceeds maxval", in.pos());
        px(r, c) = static_cast<double>(v) / denom;
      }
  }
  return GrayImage(std::move(px));
}

std::string write_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(img.size()));
  std::size_t i = header;
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      out[i++] = static_cast<char>(std::lround(std::clamp(img(r, c), 0.0, 1.0) * 255.0));
  return out;
}

GrayImage read_pgm_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return read_pgm(bytes);
}

void write_pgm_file(const std::string& path, const GrayImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const std::string bytes = write_pgm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

// ---------------------------------------------------------------------------

MaskedImage apply_checkerboard_mask(const GrayImage& img) {
  MaskedImage out{Vec(), checkerboard_partition(img.width(), img.height())};
  out.y.resize(out.part.m());
  for (Eigen::Index i = 0; i < out.part.m(); ++i) {
    const Pixel& p = out.part.m_index()[static_cast<std::size_t>(i)];
    out.y[i] = img(p.row, p.col);
  }
  return out;
}

GrayImage baseline_interpolate(const Vec& y, const PixelPartition& part,
                               const BaseInterpolator& theta) {
  return assemble_image(part, y, theta.apply(y));
}

// ---------------------------------------------------------------------------

void PatchGrid::validate() const {
  if (patch_size < 2) throw ConstructionError("patch grid: patch_size must be >= 2");
  if (stride < 1 || stride > patch_size)
    throw ConstructionError("patch grid: stride must lie in [1, patch_size]");
}

double PatchGrid::weight(int row, int col) const {
  auto w = [this](int t) {
    return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (t + 0.5) / patch_size);
  };
  return w(row) * w(col);
}

std::vector<int> PatchGrid::offsets(int extent) const {
  validate();
  if (extent < patch_size)
    throw DimensionError("patch grid: extent " + std::to_string(extent) +
                         " is smaller than the patch size " + std::to_string(patch_size));
  std::vector<int> out;
  for (int pos = 0;; pos += stride) {
    if (pos + patch_size >= extent) {
      out.push_back(extent - patch_size);
      break;
    }
    out.push_back(pos);
  }
  return out;
}

std::vector<PatchPosition> patch_positions(int width, int height, const PatchGrid& grid) {
  std::vector<PatchPosition> out;
  for (int r : grid.offsets(height))
    for (int c : grid.offsets(width)) out.push_back({r, c});
  return out;
}

std::vector<GrayImage> extract_patches(const GrayImage& img, const PatchGrid& grid,
                                       std::vector<PatchPosition>* positions) {
  const auto pos = patch_positions(img.width(), img.height(), grid);
  std::vector<GrayImage> out;
  out.reserve(pos.size());
  for (const auto& p : pos) out.push_back(img.crop(p.row, p.col, grid.patch_size, grid.patch_size));
  if (positions) *positions = pos;
  return out;
}

GrayImage fuse_patches(const std::vector<GrayImage>& patches,
                       const std::vector<PatchPosition>& positions, const PatchGrid& grid,
                       int width, int height) {
  grid.validate();
  if (patches.size() != positions.size())
    throw DimensionError("fuse_patches: " + std::to_string(patches.size()) + " patches but " +
                         std::to_string(positions.size()) + " positions");
  PixelArray num = PixelArray::Zero(height, width);
  PixelArray den = PixelArray::Zero(height, width);
  const int size = grid.patch_size;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = positions[i];
    if (patches[i].width() != size || patches[i].height() != size)
      throw DimensionError("fuse_patches: patch " + std::to_string(i) + " has the wrong size");
    if (p.row < 0 || p.col < 0 || p.row + size > height || p.col + size > width)
      throw DimensionError("fuse_patches: patch at (" + std::to_string(p.row) + ", " +
                           std::to_string(p.col) + ") lies outside the canvas");
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double w = grid.weight(r, c);
        num(p.row + r, p.col + c) += w * patches[i](r, c);
        den(p.row + r, p.col + c) += w;
      }
  }
  if ((den <= 0.0).any()) throw DimensionError("fuse_patches: canvas not fully covered");
  return GrayImage(PixelArray(num / den));
}

// ---------------------------------------------------------------------------

double mse(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b, "mse");
  if (a.empty()) throw DimensionError("mse: empty images");
  return (a.pixels() - b.pixels()).square().mean();
}

double psnr(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b, "psnr");
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_size(a, b, "ssim");
  constexpr int kWin = 11;
  if (a.width() < kWin || a.height() < kWin)
    throw DimensionError("ssim: images must be at least 11x11");
  static const std::vector<double> window = gaussian_window(kWin, 1.5);
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  const PixelArray& x = a.pixels();
  const PixelArray& y = b.pixels();

  double total = 0.0;
  long count = 0;
  for (int r0 = 0; r0 + kWin <= a.height(); ++r0) {
    for (int c0 = 0; c0 + kWin <= a.width(); ++c0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int r = 0; r < kWin; ++r)
        for (int c = 0; c < kWin; ++c) {
          const double w = window[static_cast<std::size_t>(r * kWin + c)];
          const double vx = x(r0 + r, c0 + c);
          const double vy = y(r0 + r, c0 + c);
          mx += w * vx;
          my += w * vy;
          sxx += w * vx * vx;
          syy += w * vy * vy;
          sxy += w * vx * vy;
        }
      const double var_x = sxx - mx * mx;
      const double var_y = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (var_x + var_y + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace gsvi
