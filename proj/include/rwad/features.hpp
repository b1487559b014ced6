#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rwad/errors.hpp"
#include "rwad/graph.hpp"

namespace rwad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureKind { continuous, discrete };

/// n entities x d raw features, with a per-column kind and the [min, max]
/// box observed on the data the matrix was first built from.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(RowMatrix values, std::vector<FeatureKind> kinds)
      : x_(std::move(values)), kinds_(std::move(kinds)) {
    if (kinds_.empty()) kinds_.assign(static_cast<std::size_t>(x_.cols()), FeatureKind::continuous);
    validate();
    lo_ = x_.rows() > 0 ? Vector(x_.colwise().minCoeff().transpose()) : Vector::Zero(x_.cols());
    hi_ = x_.rows() > 0 ? Vector(x_.colwise().maxCoeff().transpose()) : Vector::Zero(x_.cols());
  }

  explicit FeatureMatrix(RowMatrix values) : FeatureMatrix(std::move(values), {}) {}

  /// Same kinds and box as `this`, new values. Values need not lie in the box.
  FeatureMatrix with_values(RowMatrix values) const {
    FeatureMatrix out;
    out.x_ = std::move(values);
    out.kinds_ = kinds_;
    out.lo_ = lo_;
    out.hi_ = hi_;
    if (out.x_.cols() != x_.cols()) throw DimensionMismatch("feature dimension changed");
    out.validate();
    return out;
  }

  Index rows() const noexcept { return x_.rows(); }
  Index cols() const noexcept { return x_.cols(); }
  const RowMatrix& values() const noexcept { return x_; }
  auto row(Index i) const { return x_.row(i); }
  const std::vector<FeatureKind>& kinds() const noexcept { return kinds_; }
  FeatureKind kind(Index j) const { return kinds_[static_cast<std::size_t>(j)]; }
  const Vector& lower() const noexcept { return lo_; }
  const Vector& upper() const noexcept { return hi_; }

 private:
  void validate() const {
    if (static_cast<Index>(kinds_.size()) != x_.cols())
      throw DimensionMismatch("feature kinds do not match column count");
    if (!x_.allFinite()) throw DataError("feature matrix contains NaN or Inf");
    for (Index j = 0; j < x_.cols(); ++j) {
      if (kind(j) != FeatureKind::discrete) continue;
      for (Index i = 0; i < x_.rows(); ++i)
        if (x_(i, j) != std::round(x_(i, j)))
          throw DataError("discrete column " + std::to_string(j) + " holds a non-integer at row " +
                          std::to_string(i));
    }
  }

  RowMatrix x_;
  std::vector<FeatureKind> kinds_;
  Vector lo_, hi_;
};

enum class Metric { cosine, correlation };

inline std::string to_string(Metric m) { return m == Metric::cosine ? "cosine" : "correlation"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "correlation") return Metric::correlation;
  throw InvalidArgument("unknown similarity metric '" + s + "'");
}

namespace detail {

/// Row prepared for the metric: centered for correlation, then scaled to unit
/// norm. Zero-norm rows stay zero and report norm 0.
inline double prepare_row(Eigen::Ref<Eigen::RowVectorXd> row, Metric metric) {
  const double raw_norm = row.norm();
  if (metric == Metric::correlation) row.array() -= row.mean();
  const double norm = row.norm();
  // Centering a constant vector leaves rounding residue, not a direction.
  if (norm > 1e-12 * raw_norm) {
    row /= norm;
  } else {
    row.setZero();
    return 0.0;
  }
  return norm;
}

}  // namespace detail

/// Unit-normalized rows (centered first for correlation) and their norms. The
/// similarity of rows i and j is the dot product of their prepared rows.
struct PreparedRows {
  RowMatrix unit;
  Vector norms;
};

inline PreparedRows prepare_rows(const RowMatrix& x, Metric metric) {
  PreparedRows out{x, Vector(x.rows())};
  for (Index i = 0; i < x.rows(); ++i) out.norms(i) = detail::prepare_row(out.unit.row(i), metric);
  return out;
}

inline double clamp_similarity(double s) { return s > 1.0 ? 1.0 : (s < -1.0 ? -1.0 : s); }

/// Cosine or Pearson similarity; a zero-norm (or, for correlation, constant)
/// vector has similarity 0 with everything.
inline double similarity(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                         const Eigen::Ref<const Eigen::RowVectorXd>& b, Metric metric) {
  if (a.size() != b.size() || a.size() == 0) throw DimensionMismatch("similarity: dimension mismatch");
  Eigen::RowVectorXd x = a, y = b;
  const double nx = detail::prepare_row(x, metric);
  const double ny = detail::prepare_row(y, metric);
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return clamp_similarity(x.dot(y));
}

/// As `similarity`, but throws DegenerateVector for a constant vector under
/// correlation instead of returning 0.
inline double similarity_strict(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                                const Eigen::Ref<const Eigen::RowVectorXd>& b, Metric metric) {
  if (metric == Metric::correlation) {
    auto constant = [](const Eigen::Ref<const Eigen::RowVectorXd>& v) {
      return v.size() == 0 || v.maxCoeff() == v.minCoeff();
    };
    if (constant(a) || constant(b)) throw DegenerateVector("correlation of a constant vector");
  }
  return similarity(a, b, metric);
}

/// d sim(x_i, x_j) / d x_i given prepared rows; zero for zero-norm rows.
inline Eigen::RowVectorXd similarity_gradient(const PreparedRows& rows, Index i, Index j) {
  if (rows.norms(i) == 0.0 || rows.norms(j) == 0.0) return Eigen::RowVectorXd::Zero(rows.unit.cols());
  const double c = rows.unit.row(i).dot(rows.unit.row(j));
  // Both prepared rows are centered under correlation, so the difference is
  // already orthogonal to the constant direction.
  return (rows.unit.row(j) - c * rows.unit.row(i)) / rows.norms(i);
}

/// Discrete columns rounded to the nearest integer and clipped to the clean
/// column box; continuous columns untouched. `relaxed` may hold non-integer
/// values in discrete columns, which is why it is a raw matrix.
inline FeatureMatrix round_features(const RowMatrix& relaxed, const FeatureMatrix& clean) {
  if (relaxed.cols() != clean.cols()) throw DimensionMismatch("round_features: column count differs");
  RowMatrix v = relaxed;
  for (Index j = 0; j < v.cols(); ++j) {
    if (clean.kind(j) != FeatureKind::discrete) continue;
    for (Index i = 0; i < v.rows(); ++i)
      v(i, j) = std::clamp(std::round(v(i, j)), clean.lower()(j), clean.upper()(j));
  }
  return clean.with_values(std::move(v));
}

}  // namespace rwad
