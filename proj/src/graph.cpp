#include "gsvi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gsvi {

namespace {

struct Candidate {
  int dist2;
  int row;
  int col;
  bool operator<(const Candidate& o) const {
    if (dist2 != o.dist2) return dist2 < o.dist2;
    if (row != o.row) return row < o.row;
    return col < o.col;
  }
};

// Nearest `want_observed` pixels to (row, col) inside the square window,
// excluding the centre itself. Ties resolve in row-major order.
std::vector<Candidate> window_neighbors(const PixelPartition& part, int row, int col,
                                        bool want_observed, const EdgeParams& params) {
  std::vector<Candidate> found;
  const int r = params.window_radius;
  for (int rr = std::max(0, row - r); rr <= std::min(part.height() - 1, row + r); ++rr) {
    for (int cc = std::max(0, col - r); cc <= std::min(part.width() - 1, col + r); ++cc) {
      if (rr == row && cc == col) continue;
      if (part.observed(rr, cc) != want_observed) continue;
      found.push_back({(rr - row) * (rr - row) + (cc - col) * (cc - col), rr, cc});
    }
  }
  std::sort(found.begin(), found.end());
  if (found.size() > static_cast<std::size_t>(params.max_neighbors))
    found.resize(static_cast<std::size_t>(params.max_neighbors));
  return found;
}

Eigen::MatrixXd project(const FeatureSet& f, const MetricMatrix& metric) {
  if (f.k_dim() != metric.k_dim())
    throw DimensionError("feature dimension " + std::to_string(f.k_dim()) +
                         " does not match metric dimension " + std::to_string(metric.k_dim()));
  // Row i holds (L^T f_i)^T.
  return f.values * metric.factor();
}

}  // namespace

// ---------------------------------------------------------------------------

PixelPartition PixelPartition::from_mask(int width, int height, const std::vector<bool>& observed) {
  if (width <= 0 || height <= 0) throw DimensionError("partition: empty grid");
  if (observed.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw DimensionError("partition: mask has " + std::to_string(observed.size()) +
                         " entries for a " + std::to_string(width) + "x" +
                         std::to_string(height) + " grid");
  PixelPartition part;
  part.width_ = width;
  part.height_ = height;
  part.mask_.resize(observed.size());
  part.slot_.resize(observed.size());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t i = part.flat(r, c);
      part.mask_[i] = observed[i] ? 1 : 0;
      auto& set = observed[i] ? part.m_index_ : part.n_index_;
      part.slot_[i] = static_cast<int>(set.size());
      set.push_back({r, c});
    }
  }
  return part;
}

PixelPartition checkerboard_partition(int width, int height, bool odd_phase) {
  if (width <= 0 || height <= 0) throw DimensionError("checkerboard: zero-sized grid");
  std::vector<bool> mask(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      mask[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c)] = ((r + c) % 2 == 0) != odd_phase;
  return PixelPartition::from_mask(width, height, mask);
}

GrayImage assemble_image(const PixelPartition& part, const Vec& observed, const Vec& missing) {
  if (observed.size() != part.m() || missing.size() != part.n())
    throw DimensionError("assemble_image: got " + std::to_string(observed.size()) + " + " +
                         std::to_string(missing.size()) + " values for partition " +
                         std::to_string(part.m()) + " + " + std::to_string(part.n()));
  PixelArray px(part.height(), part.width());
  for (Eigen::Index i = 0; i < part.m(); ++i) {
    const Pixel& p = part.m_index()[static_cast<std::size_t>(i)];
    px(p.row, p.col) = observed[i];
  }
  for (Eigen::Index j = 0; j < part.n(); ++j) {
    const Pixel& p = part.n_index()[static_cast<std::size_t>(j)];
    px(p.row, p.col) = missing[j];
  }
  return GrayImage(std::move(px));
}

// ---------------------------------------------------------------------------

Vec BaseInterpolator::apply_transpose(const Vec& v) const {
  if (v.size() != theta.rows())
    throw DimensionError("theta transpose: expected length " + std::to_string(theta.rows()) +
                         ", got " + std::to_string(v.size()));
  return theta.transpose() * v;
}

void BaseInterpolator::validate(double tol) const {
  check_sparse(theta);
  for (Eigen::Index r = 0; r < theta.rows(); ++r) {
    double sum = 0.0;
    for (SpMat::InnerIterator it(theta, r); it; ++it) sum += it.value();
    if (std::abs(sum - 1.0) > tol)
      throw ConstructionError("theta row " + std::to_string(r) + " sums to " +
                              std::to_string(sum) + ", expected 1");
  }
}

BaseInterpolator build_bilinear_theta(const PixelPartition& part) {
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(part.n()) * 4);
  static constexpr int kOffsets[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
  for (Eigen::Index j = 0; j < part.n(); ++j) {
    const Pixel& px = part.n_index()[static_cast<std::size_t>(j)];
    int cols[4];
    int count = 0;
    for (const auto& off : kOffsets) {
      const int r = px.row + off[0];
      const int c = px.col + off[1];
      if (r < 0 || c < 0 || r >= part.height() || c >= part.width()) continue;
      if (part.observed(r, c)) cols[count++] = part.slot(r, c);
    }
    if (count == 0)
      throw ConstructionError("bilinear theta: missing pixel (" + std::to_string(px.row) + ", " +
                              std::to_string(px.col) + ") has no observed 4-neighbor");
    for (int k = 0; k < count; ++k)
      entries.emplace_back(static_cast<int>(j), cols[k], 1.0 / count);
  }
  BaseInterpolator out;
  out.theta = sparse_from_triplets(part.n(), part.m(), entries);
  out.kind = BaseInterpolator::Kind::bilinear_quincunx;
  return out;
}

BaseInterpolator load_theta(std::string_view text) {
  std::size_t pos = 0;
  bool have_header = false;
  long n = 0, m = 0;
  std::vector<Triplet> entries;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream in(line);
    std::string first;
    if (!(in >> first)) continue;
    std::string extra;
    if (!have_header) {
      if (first != "THETA" || !(in >> n >> m) || n <= 0 || m <= 0 || (in >> extra))
        throw ParseError("theta: expected header 'THETA N M'", line_start);
      have_header = true;
      continue;
    }
    long row = 0, col = 0;
    double value = 0.0;
    std::istringstream entry(line);
    if (!(entry >> row >> col >> value) || (entry >> extra))
      throw ParseError("theta: expected 'row col value'", line_start);
    if (row < 0 || row >= n || col < 0 || col >= m)
      throw ParseError("theta: index out of range", line_start);
    if (!std::isfinite(value)) throw ParseError("theta: non-finite value", line_start);
    entries.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
  }
  if (!have_header) throw ParseError("theta: missing header", 0);
  BaseInterpolator out;
  out.theta = sparse_from_triplets(n, m, entries);
  out.kind = BaseInterpolator::Kind::custom;
  out.validate();
  return out;
}

std::string save_theta(const BaseInterpolator& theta) {
  std::ostringstream os;
  os.precision(17);
  os << "THETA " << theta.n() << ' ' << theta.m() << '\n';
  for (Eigen::Index r = 0; r < theta.theta.rows(); ++r)
    for (SpMat::InnerIterator it(theta.theta, r); it; ++it)
      os << r << ' ' << it.col() << ' ' << it.value() << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

FeatureSet extract_features(const GrayImage& baseline, const PixelPartition& part, PixelSet which) {
  if (baseline.width() != part.width() || baseline.height() != part.height())
    throw DimensionError("extract_features: image and partition sizes differ");
  const int h = baseline.height();
  const int w = baseline.width();
  const PixelArray& v = baseline.pixels();
  auto at = [&](int r, int c) {
    return v(std::clamp(r, 0, h - 1), std::clamp(c, 0, w - 1));
  };

  constexpr int K = FeatureSet::kDefaultDim;
  std::vector<PixelArray> planes(K, PixelArray::Zero(h, w));
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double sum = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) sum += at(r + dr, c + dc);
      const double mean = sum / 9.0;
      double var = 0.0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const double d = at(r + dr, c + dc) - mean;
          var += d * d;
        }
      planes[kIntensity](r, c) = v(r, c);
      planes[kMean3x3](r, c) = mean;
      planes[kGradX](r, c) = 0.5 * (at(r, c + 1) - at(r, c - 1));
      planes[kGradY](r, c) = 0.5 * (at(r + 1, c) - at(r - 1, c));
      planes[kVariance3x3](r, c) = var / 9.0;
      planes[kLaplacian](r, c) =
          at(r - 1, c) + at(r + 1, c) + at(r, c - 1) + at(r, c + 1) - 4.0 * v(r, c);
      planes[kRowCoord](r, c) = h > 1 ? 2.0 * r / (h - 1) - 1.0 : 0.0;
      planes[kColCoord](r, c) = w > 1 ? 2.0 * c / (w - 1) - 1.0 : 0.0;
    }
  }
  for (auto& plane : planes) {
    const double peak = plane.abs().maxCoeff();
    if (peak <= 1e-12)
      plane.setZero();
    else
      plane /= peak;
  }

  const auto& pixels = which == PixelSet::observed ? part.m_index() : part.n_index();
  FeatureSet out;
  out.values.resize(static_cast<Eigen::Index>(pixels.size()), K);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    for (int k = 0; k < K; ++k)
      out.values(static_cast<Eigen::Index>(i), k) = planes[static_cast<std::size_t>(k)](
          pixels[i].row, pixels[i].col);
  return out;
}

MetricMatrix::MetricMatrix(Eigen::MatrixXd factor) : factor_(std::move(factor)) {
  if (factor_.rows() != factor_.cols() || factor_.rows() == 0)
    throw ConstructionError("metric factor must be square and nonempty");
  if (!factor_.allFinite()) throw ConstructionError("metric factor has non-finite entries");
  for (Eigen::Index r = 0; r < factor_.rows(); ++r)
    for (Eigen::Index c = r + 1; c < factor_.cols(); ++c)
      if (factor_(r, c) != 0.0) throw ConstructionError("metric factor must be lower-triangular");
  for (Eigen::Index k = 0; k < factor_.cols(); ++k)
    if (factor_(k, k) < 0.0) factor_.col(k) *= -1.0;
}

MetricMatrix MetricMatrix::identity(int k_dim, double scale) {
  return MetricMatrix(Eigen::MatrixXd::Identity(k_dim, k_dim) * scale);
}

double feature_distance(const Eigen::Ref<const Eigen::VectorXd>& f_i,
                        const Eigen::Ref<const Eigen::VectorXd>& f_j, const MetricMatrix& metric) {
  if (f_i.size() != metric.k_dim() || f_j.size() != metric.k_dim())
    throw DimensionError("feature_distance: features of length " + std::to_string(f_i.size()) +
                         " and " + std::to_string(f_j.size()) + " against a " +
                         std::to_string(metric.k_dim()) + "-dim metric");
  const Eigen::VectorXd gi = metric.factor().transpose() * f_i;
  const Eigen::VectorXd gj = metric.factor().transpose() * f_j;
  return gj.dot(gi);
}

void EdgeParams::validate() const {
  if (!(d_star > 0.0) || !std::isfinite(d_star))
    throw ConstructionError("edge params: d_star must be positive and finite");
  if (window_radius < 1) throw ConstructionError("edge params: window_radius must be >= 1");
  if (max_neighbors < 1) throw ConstructionError("edge params: max_neighbors must be >= 1");
}

double signed_weight(double d, const EdgeParams& params) {
  return -2.0 / (1.0 + std::exp(-(d - params.d_star))) + 1.0;
}

double unsigned_weight(double d_prime) { return std::exp(-d_prime); }

// ---------------------------------------------------------------------------

Vec DirectedPerturbation::apply(const Vec& v) const {
  if (v.size() != p.cols())
    throw DimensionError("perturbation: expected length " + std::to_string(p.cols()) + ", got " +
                         std::to_string(v.size()));
  if (gain == 0.0) return Vec::Zero(p.rows());
  return gain * (p * v);
}

Vec DirectedPerturbation::apply_transpose(const Vec& v) const {
  if (v.size() != p.rows())
    throw DimensionError("perturbation transpose: expected length " + std::to_string(p.rows()) +
                         ", got " + std::to_string(v.size()));
  if (gain == 0.0) return Vec::Zero(p.cols());
  return gain * (p.transpose() * v);
}

DirectedPerturbation build_directed_perturbation(const FeatureSet& features_obs,
                                                 const FeatureSet& features_mis,
                                                 const MetricMatrix& metric,
                                                 const EdgeParams& params,
                                                 const PixelPartition& part) {
  params.validate();
  if (features_obs.count() != part.m() || features_mis.count() != part.n())
    throw DimensionError("directed perturbation: feature sets do not cover the partition");
  const Eigen::MatrixXd g_obs = project(features_obs, metric);
  const Eigen::MatrixXd g_mis = project(features_mis, metric);

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(part.m()) *
                  static_cast<std::size_t>(params.max_neighbors));
  for (Eigen::Index i = 0; i < part.m(); ++i) {
    const Pixel& px = part.m_index()[static_cast<std::size_t>(i)];
    for (const Candidate& nb : window_neighbors(part, px.row, px.col, false, params)) {
      const int j = part.slot(nb.row, nb.col);
      const double d = g_mis.row(j).dot(g_obs.row(i));
      entries.emplace_back(static_cast<int>(i), j, signed_weight(d, params));
    }
  }
  DirectedPerturbation out;
  out.p = sparse_from_triplets(part.m(), part.n(), entries);
  out.gain = 0.0;
  return out;
}

DenoisingLaplacian DenoisingLaplacian::from_edges(Eigen::Index n,
                                                  const std::vector<WeightedEdge>& edges,
                                                  double gain) {
  if (!(gain >= 0.0) || !std::isfinite(gain))
    throw ConstructionError("denoising laplacian: gain must be finite and >= 0");
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  std::vector<Triplet> entries;
  entries.reserve(edges.size() * 2 + static_cast<std::size_t>(n));
  for (const WeightedEdge& e : edges) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n || e.a == e.b)
      throw ConstructionError("denoising laplacian: bad edge (" + std::to_string(e.a) + ", " +
                              std::to_string(e.b) + ")");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight))
      throw ConstructionError("denoising laplacian: edge weights must be finite and >= 0");
    entries.emplace_back(e.a, e.b, -e.weight);
    entries.emplace_back(e.b, e.a, -e.weight);
  }
  SpMat adjacency = sparse_from_triplets(n, n, entries);
  // Degrees are summed in stored column order so each row sums to zero the
  // same way a row-wise reduction would see it.
  entries.clear();
  for (Eigen::Index r = 0; r < n; ++r) {
    double d = 0.0;
    for (SpMat::InnerIterator it(adjacency, r); it; ++it) {
      d -= it.value();
      entries.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
    entries.emplace_back(static_cast<int>(r), static_cast<int>(r), d);
  }
  DenoisingLaplacian out;
  out.lap = sparse_from_triplets(n, n, entries);
  out.gain = gain;
  return out;
}

Vec DenoisingLaplacian::apply(const Vec& v) const {
  if (v.size() != lap.cols())
    throw DimensionError("laplacian: expected length " + std::to_string(lap.cols()) + ", got " +
                         std::to_string(v.size()));
  if (gain == 0.0) return Vec::Zero(lap.rows());
  return gain * (lap * v);
}

DenoisingLaplacian build_denoising_laplacian(const FeatureSet& features_mis,
                                             const MetricMatrix& metric_r,
                                             const EdgeParams& params,
                                             const PixelPartition& part) {
  params.validate();
  if (features_mis.count() != part.n())
    throw DimensionError("denoising laplacian: features do not cover the missing set");
  const Eigen::MatrixXd g = project(features_mis, metric_r);

  std::vector<std::vector<int>> knn(static_cast<std::size_t>(part.n()));
  for (Eigen::Index a = 0; a < part.n(); ++a) {
    const Pixel& px = part.n_index()[static_cast<std::size_t>(a)];
    auto& list = knn[static_cast<std::size_t>(a)];
    for (const Candidate& nb : window_neighbors(part, px.row, px.col, false, params))
      list.push_back(part.slot(nb.row, nb.col));
    std::sort(list.begin(), list.end());
  }
  std::vector<WeightedEdge> edges;
  for (Eigen::Index a = 0; a < part.n(); ++a) {
    for (int b : knn[static_cast<std::size_t>(a)]) {
      if (b <= a) continue;
      const auto& back = knn[static_cast<std::size_t>(b)];
      if (!std::binary_search(back.begin(), back.end(), static_cast<int>(a))) continue;
      const double d = g.row(b).dot(g.row(a));
      const double w = unsigned_weight(d);
      if (!std::isfinite(w))
        throw ConstructionError("denoising laplacian: edge weight overflow (d' = " +
                                std::to_string(d) + ")");
      edges.push_back({static_cast<int>(a), b, w});
    }
  }
  return DenoisingLaplacian::from_edges(part.n(), edges, 0.0);
}

double gsv_value(const Vec& x, const LinearOperator<double>& shift_op) {
  return (x - shift_op.apply(x)).squaredNorm();
}

}  // namespace gsvi
