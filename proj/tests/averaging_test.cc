#include <gtest/gtest.h>

#include "bifocal/averaging.h"
#include "bifocal/error.h"
#include "bifocal/synthetic.h"

namespace bifocal {
namespace {

Scene MakeScene(Layout layout, IntrinsicsMode intrinsics, int n, std::uint64_t seed) {
  SceneSpec spec;
  spec.layout = layout;
  spec.intrinsics = intrinsics;
  spec.n_cams = n;
  spec.seed = seed;
  return GenerateScene(spec);
}

// |<a, b>| for unit blocks: 1 when equal up to sign.
double Alignment(const Mat3& a, const Mat3& b) {
  return std::abs(NormalizeTensor(a).cwiseProduct(NormalizeTensor(b)).sum());
}

void ExpectError(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code);
  }
}

struct Case {
  Layout layout;
  TensorKind kind;
  Setting setting;
};

TEST(Averaging, ExactInputIsFixedPoint) {
  const std::vector<Case> cases{
      {Layout::kCollinear, TensorKind::kEssential, Setting::kCollinear},
      {Layout::kCollinear, TensorKind::kFundamental, Setting::kCollinear},
      {Layout::kGeneral, TensorKind::kEssential, Setting::kGeneral},
      {Layout::kGeneral, TensorKind::kFundamental, Setting::kGeneral}};
  for (const Case& c : cases) {
    const IntrinsicsMode mode = c.kind == TensorKind::kEssential ? IntrinsicsMode::kCalibrated
                                                                 : IntrinsicsMode::kVaried;
    const Scene scene = MakeScene(c.layout, mode, 10, 3);
    const NViewBifocal exact = ExactNView(scene.cameras, c.kind);
    const AveragingResult r = Average(exact, SequentialCover(10), c.setting);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 5);
    EXPECT_LT(r.primal, 1e-10);
    for (const auto& [e, blk] : r.averaged.blocks()) {
      EXPECT_NEAR(Alignment(blk, exact.Block(e.first, e.second)), 1.0, 1e-10);
    }
  }
}

TEST(Averaging, PerturbedCollinearStaysNearClean) {
  const Scene scene = MakeScene(Layout::kCollinear, IntrinsicsMode::kCalibrated, 10, 8);
  const NViewBifocal clean = ExactNView(scene.cameras, TensorKind::kEssential);
  Rng rng(81);
  std::vector<BlockEntry> noisy;
  for (const auto& [e, blk] : clean.blocks()) {
    Mat3 d;
    for (int k = 0; k < 9; ++k) d(k / 3, k % 3) = rng.Normal();
    noisy.push_back({e.first, e.second, blk + 1e-2 * d / d.norm()});
  }
  AssembleOptions options;
  options.validate_rank = false;
  const NViewBifocal measured = NViewBifocal::Assemble(10, TensorKind::kEssential, noisy, options);
  const AveragingResult r = Average(measured, SequentialCover(10), Setting::kCollinear);
  EXPECT_TRUE(r.converged);
  for (const auto& [e, blk] : r.averaged.blocks()) {
    const Mat3 c = clean.Block(e.first, e.second);
    const double sign = blk.cwiseProduct(c).sum() < 0 ? -1.0 : 1.0;
    EXPECT_LT((sign * blk - c).norm(), 2e-2) << e.first << "," << e.second;
  }
}

TEST(Averaging, NoisyCollinearConvergesAndImproves) {
  const Scene scene = MakeScene(Layout::kCollinear, IntrinsicsMode::kCalibrated, 20, 5);
  NoiseSpec noise;
  noise.rotation_deg = 0.5;
  noise.seed = 105;
  const Measurements m = Measure(scene, TensorKind::kEssential, noise);
  const AveragingResult r = Average(m.tensors, SequentialCover(20), Setting::kCollinear);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 500);
  EXPECT_LT(r.primal, 1e-9);
  // Unit blocks fix the eigenvalue pattern but not the scales along the
  // line, so only the spectral part of the certificate is expected.
  for (const Eigen::MatrixXd& t : r.triplet_matrices) {
    const ConsistencyCertificate c = CertifyCollinearEssential(t);
    EXPECT_EQ(c.rank_estimate, 4);
    EXPECT_LT(c.pattern_residual, 1e-8);
  }
}

TEST(Averaging, TripletMatricesSymmetricWithZeroDiagonal) {
  const Scene scene = MakeScene(Layout::kGeneral, IntrinsicsMode::kVaried, 8, 2);
  NoiseSpec noise;
  noise.rotation_deg = 1.0;
  noise.seed = 12;
  const Measurements m = Measure(scene, TensorKind::kFundamental, noise);
  const AveragingResult r = Average(m.tensors, SequentialCover(8), Setting::kGeneral);
  ASSERT_TRUE(r.converged);
  for (const Eigen::MatrixXd& t : r.triplet_matrices) {
    EXPECT_LT((t - t.transpose()).norm(), 1e-12);
    for (int a = 0; a < 3; ++a) EXPECT_LT((t.block<3, 3>(3 * a, 3 * a)).norm(), 1e-8);
  }
  AdmmConfig cfg;
  cfg.max_iters = 10;
  const AveragingResult capped = Average(m.tensors, SequentialCover(8), Setting::kGeneral, cfg);
  EXPECT_EQ(capped.log.size(), 10u);
  EXPECT_FALSE(capped.converged);
}

TEST(Averaging, EssentialTripletScalesMatchOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene scene = MakeScene(Layout::kGeneral, IntrinsicsMode::kCalibrated, 3, seed);
    const Eigen::MatrixXd dense = ConsistentDense(scene.cameras);
    const Mat3 ab = dense.block<3, 3>(0, 3), ac = dense.block<3, 3>(0, 6),
               bc = dense.block<3, 3>(3, 6);
    const Mat3 uab = NormalizeTensor(ab), uac = NormalizeTensor(ac), ubc = NormalizeTensor(bc);
    Eigen::Vector3d truth(ab.cwiseProduct(uab).sum(), ac.cwiseProduct(uac).sum(),
                          bc.cwiseProduct(ubc).sum());
    truth.normalize();
    Eigen::Vector3d got = EssentialTripletScales(uab, uac, ubc);
    if (got.dot(truth) < 0) got = -got;
    EXPECT_LT((got - truth).norm(), 1e-9) << "seed " << seed;
  }
}

TEST(Averaging, ThreadCountDoesNotChangeResult) {
  const Scene scene = MakeScene(Layout::kCollinear, IntrinsicsMode::kCalibrated, 12, 9);
  NoiseSpec noise;
  noise.rotation_deg = 0.5;
  noise.seed = 9;
  const Measurements m = Measure(scene, TensorKind::kEssential, noise);
  AdmmConfig one, four;
  four.threads = 4;
  const AveragingResult a = Average(m.tensors, SequentialCover(12), Setting::kCollinear, one);
  const AveragingResult b = Average(m.tensors, SequentialCover(12), Setting::kCollinear, four);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(FormatRecord(a.log[i]), FormatRecord(b.log[i]));
  }
  for (const auto& [e, blk] : a.averaged.blocks()) {
    EXPECT_TRUE(blk == b.averaged.Block(e.first, e.second));
  }
}

TEST(Averaging, Errors) {
  const Scene scene = MakeScene(Layout::kCollinear, IntrinsicsMode::kCalibrated, 6, 1);
  const NViewBifocal exact = ExactNView(scene.cameras, TensorKind::kEssential);
  ExpectError(ErrorCode::kNotConnected, [&] {
    Average(exact, MakeCover({{0, 1, 2}, {3, 4, 5}}), Setting::kCollinear);
  });
  AdmmConfig bad;
  bad.rho = 0.0;
  ExpectError(ErrorCode::kInvalidArgument,
              [&] { Average(exact, SequentialCover(6), Setting::kCollinear, bad); });
  const NViewBifocal sparse = NViewBifocal::Assemble(
      6, TensorKind::kEssential, {{0, 1, exact.Block(0, 1)}, {0, 2, exact.Block(0, 2)}});
  ExpectError(ErrorCode::kMissingBlock,
              [&] { Average(sparse, SequentialCover(3), Setting::kCollinear); });
}

TEST(Averaging, RecordFormat) {
  EXPECT_EQ(FormatRecord({3, 0.5, 0.25, 0.125}),
            "{\"iteration\":3,\"objective\":0.5,\"primal\":0.25,\"dual\":0.125}");
}

}  // namespace
}  // namespace bifocal
