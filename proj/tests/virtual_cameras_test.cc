#include <gtest/gtest.h>

#include "bifocal/error.h"
#include "bifocal/recovery.h"
#include "bifocal/synthetic.h"
#include "bifocal/virtual_cameras.h"

namespace bifocal {
namespace {

Scene LineScene(std::uint64_t seed, IntrinsicsMode mode = IntrinsicsMode::kCalibrated) {
  SceneSpec spec;
  spec.n_cams = 3;
  spec.seed = seed;
  spec.intrinsics = mode;
  return GenerateScene(spec);
}

Track Project(const std::vector<Camera>& cameras, const Vec3& x) {
  Track t;
  for (int i = 0; i < static_cast<int>(cameras.size()); ++i) {
    t.view_ids.push_back(i);
    t.points.push_back(cameras[i].Project(x));
  }
  return t;
}

std::vector<Track> Tracks(const std::vector<Camera>& cameras, const std::vector<Vec3>& points) {
  std::vector<Track> out;
  for (const Vec3& x : points) {
    bool visible = true;
    for (const Camera& c : cameras) visible = visible && c.Depth(x) > 0;
    if (visible) out.push_back(Project(cameras, x));
  }
  return out;
}

TripletBlocks Blocks(const std::vector<Camera>& cameras, TensorKind kind) {
  const NViewBifocal m = ExactNView(cameras, kind);
  return {m.Block(0, 1), m.Block(0, 2), m.Block(1, 2)};
}

// Same tensor up to scale and sign.
double Distance(const Mat3& a, const Mat3& b) {
  const Mat3 u = a.normalized(), v = b.normalized();
  return std::min((u - v).norm(), (u + v).norm());
}

// Scene point well off the camera line.
Vec3 OffLinePoint(const Scene& s) {
  for (const Vec3& x : s.points) {
    bool visible = true;
    for (const Camera& c : s.cameras) visible = visible && c.Depth(x) > 0;
    if (visible) return x;
  }
  ADD_FAILURE() << "no visible point";
  return Vec3::Zero();
}

void ExpectError(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code);
  }
}

TEST(VirtualCameras, CalibratedMatchesOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = LineScene(seed);
    const std::vector<Track> tracks = Tracks(s.cameras, s.points);
    const Vec3 x = OffLinePoint(s);
    const std::array<Mat3, 3> v =
        VirtualBifocalsCalibrated(Blocks(s.cameras, TensorKind::kEssential), {0, 1, 2},
                                  Project(s.cameras, x), tracks);
    const Camera virt = Camera::Calibrated(s.cameras[1].rotation(), x);
    for (int i = 0; i < 3; ++i) {
      EXPECT_NEAR(v[i].norm(), 1.0, 1e-12);
      EXPECT_LT(Distance(v[i], BifocalFromPair(s.cameras[i], virt).matrix()), 1e-9) << seed;
      // The virtual camera's epipole in view i is the point's image.
      const Vec3 e = Epipole(v[i], EpipoleSide::kLeft);
      EXPECT_LT(e.normalized().cross(s.cameras[i].Project(x).normalized()).norm(), 1e-9);
    }
  }
}

TEST(VirtualCameras, ProjectiveConsistentWithRecoveredFrame) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = LineScene(seed, IntrinsicsMode::kVaried);
    const std::vector<Track> tracks = Tracks(s.cameras, s.points);
    const TripletBlocks f = Blocks(s.cameras, TensorKind::kFundamental);
    const TripletCameras t = RecoverProjectiveCollinearTriplet(f[0], f[2], f[1], {0, 1, 2}, tracks);
    const Track point = Project(s.cameras, OffLinePoint(s));
    const std::array<Mat3, 3> v = VirtualBifocalsProjective(t, point);
    // Virtual camera [A_1 | -A_1 X] at the point triangulated in the frame.
    const Vec3 xp = TriangulateDlt(std::span<const Mat34>(t.projections), point).hnormalized();
    const Mat3 a1 = t.projections[1].leftCols<3>();
    Mat34 pv;
    pv << a1, -a1 * xp;
    for (int i = 0; i < 3; ++i) {
      EXPECT_LT(Distance(v[i], ConsistentBifocal(t.projections[i], pv)), 1e-7) << seed;
    }
  }
}

TEST(VirtualCameras, FourViewEssentialIsConsistent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = LineScene(seed);
    const std::vector<Track> tracks = Tracks(s.cameras, s.points);
    const TripletBlocks e = Blocks(s.cameras, TensorKind::kEssential);
    const Vec3 x = OffLinePoint(s);
    const NViewBifocal m = FourViewMatrix(
        e, VirtualBifocalsCalibrated(e, {0, 1, 2}, Project(s.cameras, x), tracks),
        TensorKind::kEssential);
    const ConsistencyCertificate c = CertifyGeneral(m);
    EXPECT_TRUE(c.pass) << seed;
    EXPECT_EQ(c.rank_estimate, 6);
    EXPECT_EQ(c.signature, std::make_pair(3, 3));
    EXPECT_LT(c.block_rotation_residual, 1e-9);
    // Proportional to the oracle matrix of the four cameras.
    std::vector<Camera> four = s.cameras;
    four.push_back(Camera::Calibrated(s.cameras[1].rotation(), x));
    const Eigen::MatrixXd truth = ConsistentDense(four), got = m.Dense();
    const double k = got.cwiseProduct(truth).sum() / truth.squaredNorm();
    EXPECT_LT((got - k * truth).norm(), 1e-8 * got.norm()) << seed;
  }
}

TEST(VirtualCameras, FourViewFundamentalIsConsistent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = LineScene(seed, IntrinsicsMode::kVaried);
    const std::vector<Track> tracks = Tracks(s.cameras, s.points);
    const TripletBlocks f = Blocks(s.cameras, TensorKind::kFundamental);
    const TripletCameras t = RecoverProjectiveCollinearTriplet(f[0], f[2], f[1], {0, 1, 2}, tracks);
    const NViewBifocal m = FourViewMatrix(
        f, VirtualBifocalsProjective(t, Project(s.cameras, OffLinePoint(s))),
        TensorKind::kFundamental);
    const ConsistencyCertificate c = CertifyGeneral(m);
    EXPECT_TRUE(c.pass) << seed;
    EXPECT_EQ(c.rank_estimate, 6);
    EXPECT_EQ(c.signature, std::make_pair(3, 3));
  }
}

TEST(VirtualCameras, PointOnCameraLineGivesNoConsistentMatrix) {
  const Scene s = LineScene(3);
  const std::vector<Track> tracks = Tracks(s.cameras, s.points);
  const TripletBlocks e = Blocks(s.cameras, TensorKind::kEssential);
  const Vec3 on_line = s.cameras[0].center() + 3.0 * (s.cameras[2].center() - s.cameras[0].center());
  bool rejected = false;
  try {
    const NViewBifocal m = FourViewMatrix(
        e, VirtualBifocalsCalibrated(e, {0, 1, 2}, Project(s.cameras, on_line), tracks),
        TensorKind::kEssential);
    rejected = !CertifyGeneral(m).pass;
  } catch (const Error&) {
    rejected = true;
  }
  EXPECT_TRUE(rejected);
}

TEST(VirtualCameras, SelectionSkipsEpipolesAndPrefersConsistentTracks) {
  const Scene s = LineScene(4);
  const TripletBlocks f = Blocks(s.cameras, TensorKind::kFundamental);
  const Vec3 c0 = s.cameras[0].center(), c2 = s.cameras[2].center();
  std::vector<Track> tracks;
  // On the camera line: every image sits on an epipole.
  tracks.push_back(Project(s.cameras, c0 + 4.0 * (c2 - c0)));
  ExpectError(ErrorCode::kNoValidPoint, [&] { SelectVirtualPoint(tracks, {0, 1, 2}, f); });
  // A two-view track is never a candidate.
  Track pair = Project(s.cameras, OffLinePoint(s));
  pair.view_ids.pop_back();
  pair.points.pop_back();
  tracks.push_back(pair);
  ExpectError(ErrorCode::kNoValidPoint, [&] { SelectVirtualPoint(tracks, {0, 1, 2}, f); });
  // Exact track beats a perturbed one listed earlier; equal scores keep the first.
  Track noisy = Project(s.cameras, OffLinePoint(s));
  noisy.points[1] += Vec3(0.02, -0.01, 0.0);
  const Track exact = Project(s.cameras, OffLinePoint(s));
  tracks.push_back(noisy);
  tracks.push_back(exact);
  tracks.push_back(exact);
  EXPECT_EQ(SelectVirtualPoint(tracks, {0, 1, 2}, f), 3);
  // A huge margin excludes everything.
  ExpectError(ErrorCode::kNoValidPoint, [&] { SelectVirtualPoint(tracks, {0, 1, 2}, f, 1e6); });
}

TEST(VirtualCameras, Errors) {
  const Scene s = LineScene(5);
  const std::vector<Track> tracks = Tracks(s.cameras, s.points);
  const TripletBlocks e = Blocks(s.cameras, TensorKind::kEssential);
  Track partial = Project(s.cameras, OffLinePoint(s));
  partial.view_ids.pop_back();
  partial.points.pop_back();
  ExpectError(ErrorCode::kInvalidArgument,
              [&] { VirtualBifocalsCalibrated(e, {0, 1, 2}, partial, tracks); });
  ExpectError(ErrorCode::kInvalidArgument, [&] {
    VirtualBifocalsCalibrated(e, {0, 1, 2}, Project(s.cameras, OffLinePoint(s)), tracks, 3);
  });
  TripletCameras empty;
  empty.cameras = {0, 1, 2};
  ExpectError(ErrorCode::kMissingRecovery,
              [&] { VirtualBifocalsProjective(empty, Project(s.cameras, OffLinePoint(s))); });
  const std::array<Mat34, 1> one{Mat34::Identity()};
  const std::array<Mat3, 1> f{Mat3::Identity()};
  ExpectError(ErrorCode::kInvalidArgument, [&] { ResectFromBifocals(one, f); });
}

}  // namespace
}  // namespace bifocal
