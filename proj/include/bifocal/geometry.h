#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

namespace bifocal {

using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

enum class TensorKind { kEssential, kFundamental };

// Camera with intrinsics K, orientation R and center t.  Projects a world
// point X to K R^T (X - t).
class Camera {
 public:
  Camera(const Mat3& intrinsics, const Mat3& rotation, const Vec3& center);

  static Camera Calibrated(const Mat3& rotation, const Vec3& center) {
    return Camera(Mat3::Identity(), rotation, center);
  }

  const Mat3& intrinsics() const { return intrinsics_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& center() const { return center_; }
  bool is_calibrated() const { return intrinsics_.isIdentity(0.0); }

  // V = K^{-T} R^T.
  Mat3 orientation_factor() const;
  // K R^T [I | -t].
  Mat34 projection() const;
  // Image point (last coordinate 1) of a world point.
  Vec3 Project(const Vec3& point) const;
  // Signed depth of a world point along the optical axis.
  double Depth(const Vec3& point) const;

 private:
  Mat3 intrinsics_;
  Mat3 rotation_;
  Vec3 center_;
};

// Bifocal tensor, stored with unit Frobenius norm and its largest-magnitude
// entry positive unless constructed with `normalize = false`.
class BifocalTensor {
 public:
  BifocalTensor(const Mat3& matrix, TensorKind kind, bool normalize = true);

  const Mat3& matrix() const { return matrix_; }
  TensorKind kind() const { return kind_; }
  bool scale_fixed() const { return scale_fixed_; }
  BifocalTensor Transposed() const;

 private:
  Mat3 matrix_;
  TensorKind kind_;
  bool scale_fixed_;
};

// A point correspondence across two or more views.  `points[k]` is the
// observation in view `view_ids[k]`, homogeneous with last coordinate 1.
struct Track {
  std::vector<int> view_ids;
  std::vector<Vec3> points;

  // Index of `view` inside the track, or -1.
  int IndexOf(int view) const;
  bool Observes(int view) const { return IndexOf(view) >= 0; }
  // Restriction of the track to the listed views, in that order.
  Track Subtrack(std::span<const int> views) const;
};

void ValidateTrack(const Track& track);

// Unit Frobenius norm, largest-magnitude entry positive.
Mat3 NormalizeTensor(const Mat3& matrix);

Mat3 Skew(const Vec3& v);
// Inverse of Skew applied to the skew-symmetric part of m.
Vec3 Vex(const Mat3& m);

// Nearest rotation in Frobenius norm (det +1).
Mat3 ProjectToRotation(const Mat3& m);
Mat3 RotationFromAxisAngle(const Vec3& axis_angle);
double GeodesicDistance(const Mat3& a, const Mat3& b);

// F_ij = V_i (T_i - T_j) V_j^T, so that x_i^T F_ij x_j = 0.
BifocalTensor BifocalFromPair(const Camera& ci, const Camera& cj);

// Fundamental matrix with x_i^T F x_j = 0 for general projection matrices.
Mat3 FundamentalFromProjections(const Mat34& pi, const Mat34& pj);

// Bifocal tensor from the 4x4 minors of [P_i; P_j]: entry (k, l) is the
// signed determinant of P_i without row k stacked on P_j without row l.  Being
// multilinear in the cameras, the blocks it gives for several cameras in one
// frame form a consistent n-view matrix without further scaling.
Mat3 ConsistentBifocal(const Mat34& pi, const Mat34& pj);

// Homogeneous (non-normalized) center of a finite or infinite camera.
Vec4 CameraCenter(const Mat34& p);

enum class EpipoleSide { kLeft, kRight };

// Right: F e = 0.  Left: e^T F = 0.  Unit norm with largest-magnitude
// component positive.
Vec3 Epipole(const BifocalTensor& tensor, EpipoleSide side);
Vec3 Epipole(const Mat3& matrix, EpipoleSide side);

double SymmetricEpipolarDistance(const BifocalTensor& tensor, const Vec3& xi,
                                 const Vec3& xj);

// DLT triangulation over all views of the track; `projections[v]` is the
// projection matrix of view v.  Result has unit norm.
Vec4 TriangulateDlt(std::span<const Mat34> projections, const Track& track);
Vec4 TriangulateDlt(std::span<const Camera> cameras, const Track& track);

// Relative pose of a pair: camera j is [I | 0] and camera i is
// [rotation | translation], with rotation = R_i^T R_j and translation the unit
// direction R_i^T (t_j - t_i).
struct RelativePose {
  Mat3 rotation;
  Vec3 translation;
  int positive_votes = 0;
};

// Decomposes an essential matrix E_ij (x_i^T E x_j = 0) by cheirality voting
// over two-view tracks whose points[0] lies in view i and points[1] in view j.
RelativePose RotationFromEssential(const BifocalTensor& essential,
                                   std::span<const Track> tracks);

}  // namespace bifocal
