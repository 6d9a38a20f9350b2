#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gsvi/gray_image.hpp"
#include "gsvi/linalg.hpp"

namespace gsvi {

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Split of a width x height grid into observed pixels (the M set, length M)
/// and missing pixels (the N set). Both index lists are row-major.
class PixelPartition {
 public:
  PixelPartition() = default;

  /// `observed` is row-major, width * height entries.
  static PixelPartition from_mask(int width, int height, const std::vector<bool>& observed);

  int width() const { return width_; }
  int height() const { return height_; }
  Eigen::Index m() const { return static_cast<Eigen::Index>(m_index_.size()); }
  Eigen::Index n() const { return static_cast<Eigen::Index>(n_index_.size()); }

  bool observed(int row, int col) const { return mask_[flat(row, col)] != 0; }
  /// Position of the pixel inside whichever index set holds it.
  int slot(int row, int col) const { return slot_[flat(row, col)]; }

  const std::vector<Pixel>& m_index() const { return m_index_; }
  const std::vector<Pixel>& n_index() const { return n_index_; }

 private:
  std::size_t flat(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> mask_;
  std::vector<int> slot_;
  std::vector<Pixel> m_index_;
  std::vector<Pixel> n_index_;
};

/// Quincunx sampling: pixel (r, c) is observed iff (r + c) is even. With
/// `odd_phase` the complementary lattice is observed instead, which is what a
/// patch cut at an odd offset of a globally masked image sees.
PixelPartition checkerboard_partition(int width, int height, bool odd_phase = false);

/// Scatters observed values and missing values back into a full image.
GrayImage assemble_image(const PixelPartition& part, const Vec& observed, const Vec& missing);

/// Linear interpolator mapping the M observed samples to the N missing ones.
struct BaseInterpolator {
  enum class Kind { bilinear_quincunx, custom };

  SpMat theta;  // N x M
  Kind kind = Kind::bilinear_quincunx;

  Eigen::Index n() const { return theta.rows(); }
  Eigen::Index m() const { return theta.cols(); }
  Vec apply(const Vec& y) const { return matvec(theta, y); }
  Vec apply_transpose(const Vec& v) const;

  /// Throws ConstructionError unless every row sums to 1 within `tol`.
  void validate(double tol = 1e-12) const;
};

BaseInterpolator build_bilinear_theta(const PixelPartition& part);

/// Text triplet format: a `THETA N M` header line, then one `row col value`
/// line per entry. Blank lines and `#` comments are ignored.
BaseInterpolator load_theta(std::string_view text);
std::string save_theta(const BaseInterpolator& theta);

enum class PixelSet { observed, missing };

/// Per-pixel feature vectors (one row per pixel of the selected set).
struct FeatureSet {
  static constexpr int kDefaultDim = 8;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;

  int k_dim() const { return static_cast<int>(values.cols()); }
  Eigen::Index count() const { return values.rows(); }
};

// Channel order of the hand-crafted extractor.
enum FeatureChannel : int {
  kIntensity = 0,
  kMean3x3,
  kGradX,
  kGradY,
  kVariance3x3,
  kLaplacian,
  kRowCoord,
  kColCoord,
};

/// Eight deterministic channels over the interpolated image, each scaled to
/// [-1, 1] by its maximum magnitude over the whole patch. Channels whose
/// magnitude never exceeds 1e-12 are treated as flat and zeroed.
FeatureSet extract_features(const GrayImage& baseline, const PixelPartition& part, PixelSet which);

/// PSD metric stored through a lower-triangular factor L; the effective
/// matrix is L * L^T. Columns are sign-flipped so the diagonal of L is >= 0.
class MetricMatrix {
 public:
  MetricMatrix() = default;
  explicit MetricMatrix(Eigen::MatrixXd factor);
  static MetricMatrix identity(int k_dim, double scale = 1.0);

  int k_dim() const { return static_cast<int>(factor_.rows()); }
  const Eigen::MatrixXd& factor() const { return factor_; }
  Eigen::MatrixXd effective() const { return factor_ * factor_.transpose(); }

 private:
  Eigen::MatrixXd factor_;
};

/// Bilinear form f_j^T M f_i. Exactly symmetric in its two feature arguments.
double feature_distance(const Eigen::Ref<const Eigen::VectorXd>& f_i,
                        const Eigen::Ref<const Eigen::VectorXd>& f_j, const MetricMatrix& metric);

struct EdgeParams {
  double d_star = 2.0;
  int window_radius = 3;
  int max_neighbors = 8;

  void validate() const;
};

/// Signed similarity weight in [-1, 1], decreasing in d, zero at d = d_star.
double signed_weight(double d, const EdgeParams& params);
/// Positive similarity weight exp(-d').
double unsigned_weight(double d_prime);

/// Signed directed graph from missing pixels back to observed ones, scaled by
/// a scalar gain at application time.
struct DirectedPerturbation {
  SpMat p;  // M x N
  double gain = 0.0;

  Vec apply(const Vec& v) const;            // gain * P v      (N -> M)
  Vec apply_transpose(const Vec& v) const;  // gain * P^T v    (M -> N)
  SpMat effective() const { return gain * p; }
};

DirectedPerturbation build_directed_perturbation(const FeatureSet& features_obs,
                                                 const FeatureSet& features_mis,
                                                 const MetricMatrix& metric,
                                                 const EdgeParams& params,
                                                 const PixelPartition& part);

struct WeightedEdge {
  int a = 0;
  int b = 0;
  double weight = 0.0;
};

/// Combinatorial Laplacian D - W of an undirected positive graph on the N
/// missing pixels, scaled by a nonnegative gain.
struct DenoisingLaplacian {
  SpMat lap;  // N x N
  double gain = 0.0;

  static DenoisingLaplacian from_edges(Eigen::Index n, const std::vector<WeightedEdge>& edges,
                                       double gain = 0.0);

  Vec apply(const Vec& v) const;  // gain * L v
  SpMat effective() const { return gain * lap; }
};

DenoisingLaplacian build_denoising_laplacian(const FeatureSet& features_mis,
                                             const MetricMatrix& metric_r,
                                             const EdgeParams& params,
                                             const PixelPartition& part);

/// Graph shift variation ||x - A x||^2.
double gsv_value(const Vec& x, const LinearOperator<double>& shift_op);

}  // namespace gsvi
