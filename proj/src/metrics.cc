#include "bifocal/metrics.h"

#include <algorithm>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "bifocal/error.h"

namespace bifocal {

SimilarityAlignment AlignSimilarity(const std::vector<Vec3>& estimated,
                                    const std::vector<Vec3>& truth) {
  const Eigen::Index n = static_cast<Eigen::Index>(estimated.size());
  if (estimated.size() != truth.size()) {
    throw Error(ErrorCode::kInvalidArgument, "center lists differ in length");
  }
  if (n < 3) throw Error(ErrorCode::kTooFew, "need three centers to align");
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = estimated[i];
    dst.col(i) = truth[i];
  }
  const Eigen::Matrix4d t = Eigen::umeyama(src, dst, true);
  SimilarityAlignment out;
  out.scale = std::cbrt(t.topLeftCorner<3, 3>().determinant());
  out.rotation = t.topLeftCorner<3, 3>() / out.scale;
  out.translation = t.topRightCorner<3, 1>();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.residuals.push_back(
        (out.scale * out.rotation * src.col(i) + out.translation - dst.col(i)).norm());
  }
  const Eigen::Matrix3Xd centered = dst.colwise() - dst.rowwise().mean();
  const Vec3 sv = Eigen::JacobiSVD<Eigen::Matrix3Xd>(centered).singularValues();
  out.line_gauge_free = !(sv(1) > 1e-9 * sv(0));
  return out;
}

PositionErrors PositionErrorsAfterAlignment(const std::vector<Vec3>& estimated,
                                            const std::vector<Vec3>& truth) {
  std::vector<double> r = AlignSimilarity(estimated, truth).residuals;
  PositionErrors out;
  for (double v : r) out.mean += v;
  out.mean /= static_cast<double>(r.size());
  std::sort(r.begin(), r.end());
  const std::size_t mid = r.size() / 2;
  out.median = r.size() % 2 ? r[mid] : 0.5 * (r[mid - 1] + r[mid]);
  out.max = r.back();
  return out;
}

double MeanReprojectionError(std::span<const Mat34> projections,
                             const std::vector<bool>& available,
                             std::span<const Track> tracks) {
  double total = 0.0;
  long count = 0;
  for (const Track& t : tracks) {
    Track usable;
    for (std::size_t k = 0; k < t.view_ids.size(); ++k) {
      const int v = t.view_ids[k];
      if (v < 0 || v >= static_cast<int>(projections.size()) || !available[v]) continue;
      usable.view_ids.push_back(v);
      usable.points.push_back(t.points[k]);
    }
    if (usable.view_ids.size() < 2) continue;
    const Vec4 x = TriangulateDlt(projections, usable);
    for (std::size_t k = 0; k < usable.view_ids.size(); ++k) {
      const Vec3 p = projections[usable.view_ids[k]] * x;
      total += (p.hnormalized() - usable.points[k].hnormalized()).norm();
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace bifocal
