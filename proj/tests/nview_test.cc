#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "bifocal/error.h"
#include "bifocal/nview.h"
#include "bifocal/synthetic.h"

namespace bifocal {
namespace {

Scene MakeScene(Layout layout, int n, std::uint64_t seed, IntrinsicsMode k) {
  SceneSpec spec;
  spec.layout = layout;
  spec.n_cams = n;
  spec.n_points = 20;
  spec.seed = seed;
  spec.intrinsics = k;
  return GenerateScene(spec);
}

TEST(NView, AssembleStoresUpperAndTransposes) {
  const Scene s = MakeScene(Layout::kGeneral, 4, 1, IntrinsicsMode::kVaried);
  const NViewBifocal m = ExactNView(s.cameras, TensorKind::kFundamental);
  EXPECT_EQ(m.n(), 4);
  EXPECT_EQ(m.Edges().size(), 6u);
  EXPECT_LT((m.Block(2, 1) - m.Block(1, 2).transpose()).norm(), 1e-15);
  const Eigen::MatrixXd d = m.Dense();
  EXPECT_LT((d - d.transpose()).norm(), 1e-15);
  EXPECT_LT((d.block<3, 3>(3, 3).norm()), 1e-15);
}

TEST(NView, AssembleValidation) {
  const Mat3 f = Skew(Vec3(1, 2, 3));
  EXPECT_THROW(NViewBifocal::Assemble(3, TensorKind::kFundamental, {{0, 5, f}}), Error);
  try {
    NViewBifocal::Assemble(3, TensorKind::kFundamental, {{0, 1, f}, {1, 0, f}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateEdge);
  }
  try {
    NViewBifocal::Assemble(3, TensorKind::kFundamental, {{0, 1, Mat3::Identity()}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankNot2);
  }
  const NViewBifocal m = NViewBifocal::Assemble(3, TensorKind::kFundamental, {{0, 1, f}});
  try {
    m.Block(1, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingBlock);
  }
}

TEST(NView, DenseRoundTrip) {
  const Scene s = MakeScene(Layout::kGeneral, 5, 2, IntrinsicsMode::kVaried);
  const NViewBifocal m = ExactNView(s.cameras, TensorKind::kFundamental);
  const NViewBifocal back = FromDense(m.Dense(), TensorKind::kFundamental);
  EXPECT_LT((back.Dense() - m.Dense()).norm(), 1e-14);
  const std::vector<int> sub{0, 3, 4};
  const Eigen::MatrixXd sm = m.Submatrix(sub);
  EXPECT_LT(((sm.block<3, 3>(3, 6) - m.Block(3, 4)).norm()), 1e-15);
}

TEST(NView, WellformedEssentialBlocks) {
  const Scene s = MakeScene(Layout::kGeneral, 4, 3, IntrinsicsMode::kCalibrated);
  const WellformedReport ok = CheckNViewWellformed(ExactNView(s.cameras, TensorKind::kEssential));
  EXPECT_TRUE(ok.pass);
  EXPECT_EQ(ok.blocks.size(), 6u);
  Mat3 skewed = Skew(Vec3(1, 0, 0));
  skewed(1, 2) *= 3.0;  // rank 2, unequal singular values
  AssembleOptions raw;
  const NViewBifocal bad =
      NViewBifocal::Assemble(2, TensorKind::kEssential, {{0, 1, skewed}}, raw);
  const WellformedReport r = CheckNViewWellformed(bad);
  EXPECT_FALSE(r.pass);
  ASSERT_EQ(r.failing.size(), 1u);
}

TEST(NView, SpectralMapsAreInverse) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(9, 4).householderQr().householderQ();
  q = q.leftCols(4).eval();
  const Eigen::MatrixXd u = q.leftCols(2), v = q.rightCols(2);
  const SpectralPair xy = SvdSpectralMap(u, v, Eigen::Matrix2d::Identity());
  const SpectralPair back = SpectralSvdMap(xy.x, xy.y);
  EXPECT_LT((back.x - u).norm(), 1e-12);
  EXPECT_LT((back.y - v).norm(), 1e-12);
  Eigen::MatrixXd skewed = q;
  skewed(0, 0) += 0.1;
  EXPECT_THROW(SvdSpectralMap(skewed.leftCols(2), skewed.rightCols(2),
                              Eigen::Matrix2d::Identity()),
               Error);
}

TEST(NView, FactorTwoPlusTwoMinusReconstructs) {
  const Scene s = MakeScene(Layout::kCollinear, 5, 4, IntrinsicsMode::kVaried);
  const Eigen::MatrixXd f = ConsistentDense(s.cameras);
  const SpectralPair uv = FactorTwoPlusTwoMinus(f);
  const Eigen::MatrixXd rebuilt = uv.x * uv.y.transpose() + uv.y * uv.x.transpose();
  EXPECT_LT((rebuilt - f).norm(), 1e-9 * f.norm());
}

TEST(NView, CollinearEssentialCertificate) {
  const Scene s = MakeScene(Layout::kCollinear, 8, 5, IntrinsicsMode::kCalibrated);
  const ConsistencyCertificate c = CertifyCollinearEssential(ConsistentDense(s.cameras));
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.rank_estimate, 4);
  EXPECT_LT(c.pattern_residual, 1e-8);
  EXPECT_LT(c.orthogonality_residual, 1e-8);
  EXPECT_EQ(c.v_hat.rows(), 24);
}

TEST(NView, CollinearEssentialCertificateRejectsGeneral) {
  const Scene s = MakeScene(Layout::kGeneral, 6, 6, IntrinsicsMode::kCalibrated);
  const ConsistencyCertificate c = CertifyCollinearEssential(ConsistentDense(s.cameras));
  EXPECT_FALSE(c.pass);
  EXPECT_EQ(c.rank_estimate, 6);
}

TEST(NView, CollinearFundamentalCertificate) {
  const Scene s = MakeScene(Layout::kCollinear, 7, 7, IntrinsicsMode::kVaried);
  const ConsistencyCertificate c = CertifyCollinearFundamental(ConsistentDense(s.cameras));
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.signature, std::make_pair(2, 2));
  for (int r : c.block_row_ranks) EXPECT_EQ(r, 2);
}

TEST(NView, GeneralCertificates) {
  const Scene s = MakeScene(Layout::kGeneral, 6, 8, IntrinsicsMode::kCalibrated);
  const ConsistencyCertificate e = CertifyGeneral(ConsistentDense(s.cameras), TensorKind::kEssential);
  EXPECT_TRUE(e.pass);
  EXPECT_LT(e.block_rotation_residual, 1e-9);
  const Scene v = MakeScene(Layout::kGeneral, 6, 9, IntrinsicsMode::kVaried);
  const ConsistencyCertificate f = CertifyGeneral(ConsistentDense(v.cameras), TensorKind::kFundamental);
  EXPECT_TRUE(f.pass);
  EXPECT_EQ(f.rank_estimate, 6);
  EXPECT_EQ(f.signature, std::make_pair(3, 3));
}

TEST(NView, InconsistentScalesFailCertificate) {
  const Scene s = MakeScene(Layout::kGeneral, 5, 10, IntrinsicsMode::kVaried);
  Eigen::MatrixXd d = ConsistentDense(s.cameras);
  d.block<3, 3>(0, 3) *= 2.0;
  d.block<3, 3>(3, 0) *= 2.0;
  EXPECT_FALSE(CertifyGeneral(d, TensorKind::kFundamental).pass);
}

}  // namespace
}  // namespace bifocal
