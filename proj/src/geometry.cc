#include "bifocal/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "bifocal/error.h"

namespace bifocal {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kCoincidentCenters: return "CoincidentCenters";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kDegenerateLine: return "DegenerateLine";
    case ErrorCode::kDegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::kAmbiguousCheirality: return "AmbiguousCheirality";
    case ErrorCode::kDuplicateEdge: return "DuplicateEdge";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kRankNot2: return "RankNot2";
    case ErrorCode::kNotOrthonormal: return "NotOrthonormal";
    case ErrorCode::kNotConnected: return "NotConnected";
    case ErrorCode::kMissingBlock: return "MissingBlock";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kInconsistentInput: return "InconsistentInput";
    case ErrorCode::kCyclicInconsistency: return "CyclicInconsistency";
    case ErrorCode::kInsufficientTracks: return "InsufficientTracks";
    case ErrorCode::kDegenerateEpipole: return "DegenerateEpipole";
    case ErrorCode::kAlignmentIllConditioned: return "AlignmentIllConditioned";
    case ErrorCode::kNoValidPoint: return "NoValidPoint";
    case ErrorCode::kRotationAmbiguity: return "RotationAmbiguity";
    case ErrorCode::kMissingRecovery: return "MissingRecovery";
    case ErrorCode::kTooFewCameras: return "TooFewCameras";
    case ErrorCode::kNoTriangles: return "NoTriangles";
    case ErrorCode::kUnconnectable: return "Unconnectable";
    case ErrorCode::kTooFew: return "TooFew";
    case ErrorCode::kPreconditionViolated: return "PreconditionViolated";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

Camera::Camera(const Mat3& intrinsics, const Mat3& rotation, const Vec3& center)
    : intrinsics_(intrinsics), rotation_(rotation), center_(center) {
  if (!intrinsics.allFinite() || !rotation.allFinite() || !center.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "camera parameters not finite");
  }
  if ((rotation.transpose() * rotation - Mat3::Identity()).norm() > 1e-9 ||
      std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "rotation is not in SO(3)");
  }
  if (intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 ||
      intrinsics(2, 1) != 0.0 || intrinsics(2, 2) != 1.0 ||
      intrinsics(0, 0) <= 0.0 || intrinsics(1, 1) <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "intrinsics must be upper triangular with K[2][2] = 1 and a "
                "positive diagonal");
  }
}

Mat3 Camera::orientation_factor() const {
  return intrinsics_.inverse().transpose() * rotation_.transpose();
}

Mat34 Camera::projection() const {
  Mat34 p;
  const Mat3 kr = intrinsics_ * rotation_.transpose();
  p.leftCols<3>() = kr;
  p.col(3) = -kr * center_;
  return p;
}

Vec3 Camera::Project(const Vec3& point) const {
  const Vec3 x = intrinsics_ * rotation_.transpose() * (point - center_);
  return x / x.z();
}

double Camera::Depth(const Vec3& point) const {
  return (rotation_.transpose() * (point - center_)).z();
}

Mat3 NormalizeTensor(const Mat3& matrix) {
  const double norm = matrix.norm();
  if (!(norm > 0.0)) {
    throw Error(ErrorCode::kRankDeficient, "zero tensor");
  }
  Mat3 out = matrix / norm;
  double best = -1.0;
  double sign = 1.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (std::abs(out(r, c)) > best) {
        best = std::abs(out(r, c));
        sign = out(r, c) < 0.0 ? -1.0 : 1.0;
      }
    }
  }
  return sign * out;
}

BifocalTensor::BifocalTensor(const Mat3& matrix, TensorKind kind, bool normalize)
    : matrix_(normalize ? NormalizeTensor(matrix) : matrix),
      kind_(kind),
      scale_fixed_(normalize) {}

BifocalTensor BifocalTensor::Transposed() const {
  return BifocalTensor(matrix_.transpose(), kind_, scale_fixed_);
}

int Track::IndexOf(int view) const {
  const auto it = std::find(view_ids.begin(), view_ids.end(), view);
  return it == view_ids.end() ? -1 : static_cast<int>(it - view_ids.begin());
}

Track Track::Subtrack(std::span<const int> views) const {
  Track out;
  for (int v : views) {
    const int k = IndexOf(v);
    if (k < 0) {
      throw Error(ErrorCode::kInvalidArgument, "track does not observe view");
    }
    out.view_ids.push_back(v);
    out.points.push_back(points[k]);
  }
  return out;
}

void ValidateTrack(const Track& track) {
  if (track.view_ids.size() != track.points.size() || track.view_ids.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "track needs >= 2 observations");
  }
  for (size_t a = 0; a < track.view_ids.size(); ++a) {
    if (!track.points[a].allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "track point not finite");
    }
    for (size_t b = a + 1; b < track.view_ids.size(); ++b) {
      if (track.view_ids[a] == track.view_ids[b]) {
        throw Error(ErrorCode::kInvalidArgument, "track views not distinct");
      }
    }
  }
}

Mat3 Skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 Vex(const Mat3& m) {
  const Mat3 s = 0.5 * (m - m.transpose());
  return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

Mat3 ProjectToRotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Mat3 RotationFromAxisAngle(const Vec3& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

double GeodesicDistance(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

BifocalTensor BifocalFromPair(const Camera& ci, const Camera& cj) {
  const Vec3 baseline = ci.center() - cj.center();
  if (baseline.norm() < 1e-12) {
    throw Error(ErrorCode::kCoincidentCenters, "camera centers coincide");
  }
  const Mat3 f =
      ci.orientation_factor() * Skew(baseline) * cj.orientation_factor().transpose();
  const TensorKind kind = ci.is_calibrated() && cj.is_calibrated()
                              ? TensorKind::kEssential
                              : TensorKind::kFundamental;
  return BifocalTensor(f, kind);
}

Vec4 CameraCenter(const Mat34& p) {
  Eigen::JacobiSVD<Mat34> svd(p, Eigen::ComputeFullV);
  Vec4 c = svd.matrixV().col(3);
  if (c(3) < 0.0) c = -c;
  return c;
}

Mat3 FundamentalFromProjections(const Mat34& pi, const Mat34& pj) {
  const Vec3 ei = pi * CameraCenter(pj);
  const Eigen::Matrix<double, 4, 3> pinv =
      pj.transpose() * (pj * pj.transpose()).inverse();
  return Skew(ei) * pi * pinv;
}

Mat3 ConsistentBifocal(const Mat34& pi, const Mat34& pj) {
  Mat3 f;
  for (int k = 0; k < 3; ++k) {
    for (int l = 0; l < 3; ++l) {
      Eigen::Matrix4d m;
      m << pi.row((k + 1) % 3), pi.row((k + 2) % 3), pj.row((l + 1) % 3), pj.row((l + 2) % 3);
      f(k, l) = m.determinant();
    }
  }
  return f;
}

Vec3 Epipole(const Mat3& matrix, EpipoleSide side) {
  Eigen::JacobiSVD<Mat3> svd(matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) < 1e-9 * s(0)) {
    throw Error(ErrorCode::kRankDeficient, "tensor rank below 2");
  }
  Vec3 e = side == EpipoleSide::kRight ? Vec3(svd.matrixV().col(2))
                                       : Vec3(svd.matrixU().col(2));
  int k = 0;
  e.cwiseAbs().maxCoeff(&k);
  if (e(k) < 0.0) e = -e;
  return e.normalized();
}

Vec3 Epipole(const BifocalTensor& tensor, EpipoleSide side) {
  return Epipole(tensor.matrix(), side);
}

double SymmetricEpipolarDistance(const BifocalTensor& tensor, const Vec3& xi,
                                 const Vec3& xj) {
  const Mat3& f = tensor.matrix();
  const Vec3 line_i = f * xj;
  const Vec3 line_j = f.transpose() * xi;
  const double ni = line_i.head<2>().squaredNorm();
  const double nj = line_j.head<2>().squaredNorm();
  const double floor = 1e-300;
  if (ni <= floor || nj <= floor) {
    throw Error(ErrorCode::kDegenerateLine, "epipolar line at infinity");
  }
  const double r = xi.dot(f * xj);
  return r * r * (1.0 / ni + 1.0 / nj);
}

Vec4 TriangulateDlt(std::span<const Mat34> projections, const Track& track) {
  ValidateTrack(track);
  const int views = static_cast<int>(track.view_ids.size());
  Eigen::MatrixXd a(3 * views, 4);
  for (int k = 0; k < views; ++k) {
    const int v = track.view_ids[k];
    if (v < 0 || v >= static_cast<int>(projections.size())) {
      throw Error(ErrorCode::kIndexOutOfRange, "track view has no camera");
    }
    const Mat34& p = projections[v];
    a.middleRows<3>(3 * k) = Skew(track.points[k]) * (p / p.norm());
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d s = svd.singularValues().head<4>();
  if (std::abs(s(2) - s(3)) <= 1e-12 * s(0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "ambiguous triangulation");
  }
  Vec4 x = svd.matrixV().col(3);
  if (x(3) < 0.0) x = -x;
  return x.normalized();
}

Vec4 TriangulateDlt(std::span<const Camera> cameras, const Track& track) {
  std::vector<Mat34> projections;
  projections.reserve(cameras.size());
  for (const Camera& c : cameras) projections.push_back(c.projection());
  return TriangulateDlt(std::span<const Mat34>(projections), track);
}

namespace {

int CountPositiveDepths(const Mat3& rotation, const Vec3& translation,
                        std::span<const Track> tracks) {
  std::array<Mat34, 2> p;
  p[0] << rotation, translation;                          // view i
  p[1] << Mat3::Identity(), Vec3::Zero();                 // view j
  int votes = 0;
  for (const Track& track : tracks) {
    Track local;
    local.view_ids = {0, 1};
    local.points = {track.points[0], track.points[1]};
    Vec4 x;
    try {
      x = TriangulateDlt(std::span<const Mat34>(p), local);
    } catch (const Error&) {
      continue;
    }
    const double depth_j = x(2) * x(3);
    const double depth_i = (p[0] * x)(2) * x(3);
    if (depth_i > 0.0 && depth_j > 0.0) ++votes;
  }
  return votes;
}

}  // namespace

RelativePose RotationFromEssential(const BifocalTensor& essential,
                                   std::span<const Track> tracks) {
  if (essential.kind() != TensorKind::kEssential) {
    throw Error(ErrorCode::kInvalidArgument, "essential tensor required");
  }
  if (tracks.empty()) {
    throw Error(ErrorCode::kInsufficientTracks, "no tracks for cheirality");
  }
  for (const Track& t : tracks) {
    if (t.points.size() < 2) {
      throw Error(ErrorCode::kInvalidArgument, "two-view track required");
    }
  }
  Eigen::JacobiSVD<Mat3> svd(essential.matrix(),
                             Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const std::array<Mat3, 2> rotations = {u * w * v.transpose(),
                                         u * w.transpose() * v.transpose()};
  const Vec3 t = u.col(2);

  RelativePose best;
  int second = -1;
  best.positive_votes = -1;
  for (const Mat3& r : rotations) {
    for (double sign : {1.0, -1.0}) {
      const int votes = CountPositiveDepths(r, sign * t, tracks);
      if (votes > best.positive_votes) {
        second = best.positive_votes;
        best = RelativePose{r, sign * t, votes};
      } else if (votes > second) {
        second = votes;
      }
    }
  }
  if (best.positive_votes == second) {
    throw Error(ErrorCode::kAmbiguousCheirality, "cheirality vote tied");
  }
  best.translation.normalize();
  return best;
}

}  // namespace bifocal
