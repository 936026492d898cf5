#include <gtest/gtest.h>

#include <vector>

#include "bifocal/error.h"
#include "bifocal/geometry.h"
#include "bifocal/synthetic.h"

namespace bifocal {
namespace {

double ScaleFreeDistance(const Mat3& a, const Mat3& b) {
  const Mat3 na = a.normalized();
  const Mat3 nb = b.normalized();
  return std::min((na - nb).norm(), (na + nb).norm());
}

Scene GeneralScene(std::uint64_t seed, IntrinsicsMode k = IntrinsicsMode::kVaried) {
  SceneSpec spec;
  spec.layout = Layout::kGeneral;
  spec.n_cams = 4;
  spec.n_points = 20;
  spec.seed = seed;
  spec.intrinsics = k;
  return GenerateScene(spec);
}

TEST(Geometry, SkewVexRoundTrip) {
  const Vec3 v(0.3, -1.2, 2.5);
  EXPECT_LT((Vex(Skew(v)) - v).norm(), 1e-15);
  EXPECT_LT((Skew(v) * v).norm(), 1e-15);
}

TEST(Geometry, ProjectToRotationGivesSO3) {
  Mat3 m;
  m << 1, 2, 0, -0.5, 1, 3, 0.2, 0.1, -1;
  const Mat3 r = ProjectToRotation(m);
  EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(Geometry, AxisAngleAndGeodesic) {
  const Vec3 w(0.1, -0.2, 0.3);
  const Mat3 r = RotationFromAxisAngle(w);
  EXPECT_NEAR(GeodesicDistance(Mat3::Identity(), r), w.norm(), 1e-12);
}

TEST(Geometry, CameraRejectsInvalidRotation) {
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = -1.0;
  EXPECT_THROW(Camera::Calibrated(bad, Vec3::Zero()), Error);
}

TEST(Geometry, NormalizeTensorConvention) {
  Mat3 m;
  m << 0, -4, 1, 2, 0, 0, 0, 1, 0;
  const Mat3 n = NormalizeTensor(m);
  EXPECT_NEAR(n.norm(), 1.0, 1e-15);
  EXPECT_GT(n(0, 1), 0.0);
}

TEST(Geometry, EpipolarConstraintHolds) {
  const Scene scene = GeneralScene(1);
  const BifocalTensor f = BifocalFromPair(scene.cameras[0], scene.cameras[1]);
  EXPECT_EQ(f.kind(), TensorKind::kFundamental);
  for (const Vec3& x : scene.points) {
    const Vec3 xi = scene.cameras[0].Project(x);
    const Vec3 xj = scene.cameras[1].Project(x);
    EXPECT_LT(std::abs(xi.dot(f.matrix() * xj)), 1e-12);
    EXPECT_LT(SymmetricEpipolarDistance(f, xi, xj), 1e-10);
  }
}

TEST(Geometry, CalibratedPairGivesEssential) {
  const Camera a = Camera::Calibrated(Mat3::Identity(), Vec3::Zero());
  const Camera b = Camera::Calibrated(RotationFromAxisAngle(Vec3(0, 0.2, 0)), Vec3(1, 0, 0));
  const BifocalTensor e = BifocalFromPair(a, b);
  EXPECT_EQ(e.kind(), TensorKind::kEssential);
  const Eigen::JacobiSVD<Mat3> svd(e.matrix());
  EXPECT_NEAR(svd.singularValues()(0), svd.singularValues()(1), 1e-12);
  EXPECT_LT(svd.singularValues()(2), 1e-12);
}

TEST(Geometry, CoincidentCentersRejected) {
  const Camera a = Camera::Calibrated(Mat3::Identity(), Vec3(1, 2, 3));
  const Camera b = Camera::Calibrated(RotationFromAxisAngle(Vec3(0.1, 0, 0)), Vec3(1, 2, 3));
  try {
    BifocalFromPair(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoincidentCenters);
  }
}

TEST(Geometry, EpipolesAreImagesOfCenters) {
  const Scene scene = GeneralScene(2);
  const Camera& ci = scene.cameras[0];
  const Camera& cj = scene.cameras[1];
  const BifocalTensor f = BifocalFromPair(ci, cj);
  // Right epipole lives in image j and is the image of center i.
  const Vec3 right = Epipole(f, EpipoleSide::kRight);
  const Vec3 left = Epipole(f, EpipoleSide::kLeft);
  EXPECT_LT((f.matrix() * right).norm(), 1e-12);
  EXPECT_LT((left.transpose() * f.matrix()).norm(), 1e-12);
  const Vec3 ci_in_j = cj.projection() * ci.center().homogeneous();
  const Vec3 cj_in_i = ci.projection() * cj.center().homogeneous();
  EXPECT_LT(right.cross(ci_in_j.normalized()).norm(), 1e-10);
  EXPECT_LT(left.cross(cj_in_i.normalized()).norm(), 1e-10);
}

TEST(Geometry, FundamentalFromProjectionsMatchesPair) {
  const Scene scene = GeneralScene(3);
  const Mat3 f = FundamentalFromProjections(scene.cameras[2].projection(),
                                            scene.cameras[3].projection());
  const Mat3 g = BifocalFromPair(scene.cameras[2], scene.cameras[3]).matrix();
  EXPECT_LT(ScaleFreeDistance(f, g), 1e-10);
}

TEST(Geometry, TriangulationRecoversPoint) {
  const Scene scene = GeneralScene(4);
  const Vec3& x = scene.points[5];
  Track track;
  for (int v = 0; v < 4; ++v) {
    track.view_ids.push_back(v);
    track.points.push_back(scene.cameras[v].Project(x));
  }
  const Vec4 h = TriangulateDlt(std::span<const Camera>(scene.cameras), track);
  EXPECT_NEAR(h.norm(), 1.0, 1e-12);
  EXPECT_LT((h.hnormalized() - x).norm(), 1e-9);
}

TEST(Geometry, TrackSubtrackAndValidation) {
  Track t{{4, 1, 7}, {Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(2, 0, 1)}};
  EXPECT_EQ(t.IndexOf(7), 2);
  EXPECT_EQ(t.IndexOf(3), -1);
  const std::vector<int> views{7, 4};
  const Track s = t.Subtrack(views);
  EXPECT_EQ(s.view_ids, views);
  EXPECT_EQ(s.points[0].x(), 2.0);
  Track bad{{1, 1}, {Vec3(0, 0, 1), Vec3(0, 0, 1)}};
  EXPECT_THROW(ValidateTrack(bad), Error);
}

TEST(Geometry, RelativePoseFromEssential) {
  const Scene scene = GeneralScene(5, IntrinsicsMode::kCalibrated);
  const Camera& ci = scene.cameras[0];
  const Camera& cj = scene.cameras[1];
  const BifocalTensor e = BifocalFromPair(ci, cj);
  std::vector<Track> tracks;
  for (const Vec3& x : scene.points) {
    tracks.push_back({{0, 1}, {ci.Project(x), cj.Project(x)}});
  }
  const RelativePose pose = RotationFromEssential(e, tracks);
  const Mat3 rel = ci.rotation().transpose() * cj.rotation();
  const Vec3 dir = (ci.rotation().transpose() * (cj.center() - ci.center())).normalized();
  EXPECT_LT((pose.rotation - rel).norm(), 1e-9);
  EXPECT_LT((pose.translation - dir).norm(), 1e-9);
  EXPECT_EQ(pose.positive_votes, static_cast<int>(tracks.size()));
}

}  // namespace
}  // namespace bifocal
