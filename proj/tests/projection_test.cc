#include <gtest/gtest.h>

#include <functional>

#include <Eigen/Eigenvalues>

#include "bifocal/nview.h"
#include "bifocal/projection.h"
#include "bifocal/synthetic.h"

namespace bifocal {
namespace {

using Projector = std::function<ProjectionResult(const Eigen::MatrixXd&, double)>;

Eigen::MatrixXd RandomSymmetric(Rng& rng, int n) {
  Eigen::MatrixXd m(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c <= r; ++c) m(r, c) = m(c, r) = rng.Normal();
  }
  return m;
}

Eigen::VectorXd Spectrum(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  return solver.eigenvalues().reverse();
}

Scene Triplet(Layout layout, IntrinsicsMode k, std::uint64_t seed) {
  SceneSpec spec;
  spec.layout = layout;
  spec.n_cams = 3;
  spec.seed = seed;
  spec.intrinsics = k;
  return GenerateScene(spec);
}

void ExpectIdempotent(const Projector& p) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd s = RandomSymmetric(rng, 9);
    const Eigen::MatrixXd once = p(s, 1e-6).matrix;
    const Eigen::MatrixXd twice = p(once, 1e-6).matrix;
    EXPECT_LT((twice - once).norm(), 1e-10 * std::max(1.0, once.norm()));
    EXPECT_LT((once - once.transpose()).norm(), 1e-12);
  }
}

TEST(Projection, CollinearEssentialSpectrum) {
  Rng rng(1);
  const Eigen::MatrixXd s = RandomSymmetric(rng, 9);
  const Eigen::VectorXd l = Spectrum(s);
  const Eigen::VectorXd out = Spectrum(ProjectCollinearEssential(s).matrix);
  EXPECT_NEAR(out(0), 0.5 * (l(0) - l(8)), 1e-12);
  EXPECT_NEAR(out(1), 0.5 * (l(1) - l(7)), 1e-12);
  EXPECT_NEAR(out(8), -out(0), 1e-12);
  EXPECT_NEAR(out(7), -out(1), 1e-12);
  for (int i = 2; i < 7; ++i) EXPECT_NEAR(out(i), 0.0, 1e-12);
}

TEST(Projection, PairedDiagonalIsFixed) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Random(9, 9).householderQr().householderQ();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(9);
  d << 3, 1, 0, 0, 0, 0, 0, -1, -3;
  const Eigen::MatrixXd s = q * d.asDiagonal() * q.transpose();
  EXPECT_LT((ProjectCollinearEssential(s).matrix - s).norm(), 1e-12);
}

TEST(Projection, FundamentalFlagsPsdInput) {
  Rng rng(2);
  const Eigen::MatrixXd a = RandomSymmetric(rng, 9);
  const Eigen::MatrixXd psd = a * a.transpose();
  EXPECT_TRUE(ProjectCollinearFundamental(psd).signature_deficient);
  EXPECT_TRUE(ProjectGeneralFundamental(psd).signature_deficient);
  EXPECT_FALSE(ProjectCollinearFundamental(a).signature_deficient);
}

TEST(Projection, FundamentalSpectra) {
  Rng rng(3);
  const Eigen::MatrixXd s = RandomSymmetric(rng, 9);
  const Eigen::VectorXd l = Spectrum(s);
  const Eigen::VectorXd c = Spectrum(ProjectCollinearFundamental(s).matrix);
  const Eigen::VectorXd g = Spectrum(ProjectGeneralFundamental(s).matrix);
  EXPECT_NEAR(c(0), l(0), 1e-12);
  EXPECT_NEAR(c(8), l(8), 1e-12);
  EXPECT_NEAR(c(4), 0.0, 1e-12);
  EXPECT_NEAR(g(2), l(2), 1e-12);
  EXPECT_NEAR(g(6), l(6), 1e-12);
  EXPECT_NEAR(g(4), 0.0, 1e-12);
}

TEST(Projection, AllOperatorsIdempotent) {
  ExpectIdempotent(ProjectCollinearEssential);
  ExpectIdempotent(ProjectCollinearFundamental);
  ExpectIdempotent(ProjectGeneralEssential);
  ExpectIdempotent(ProjectGeneralFundamental);
}

TEST(Projection, ConsistentInputsAreFixedPoints) {
  const Scene ce = Triplet(Layout::kCollinear, IntrinsicsMode::kCalibrated, 4);
  const Eigen::MatrixXd e = ConsistentDense(ce.cameras);
  EXPECT_LT((ProjectCollinearEssential(e).matrix - e).norm(), 1e-10 * e.norm());
  const Scene ge = Triplet(Layout::kGeneral, IntrinsicsMode::kCalibrated, 5);
  const Eigen::MatrixXd g = ConsistentDense(ge.cameras);
  EXPECT_LT((ProjectGeneralEssential(g).matrix - g).norm(), 1e-10 * g.norm());
  const Scene gf = Triplet(Layout::kGeneral, IntrinsicsMode::kVaried, 6);
  const Eigen::MatrixXd f = ConsistentDense(gf.cameras);
  EXPECT_LT((ProjectGeneralFundamental(f).matrix - f).norm(), 1e-10 * f.norm());
}

TEST(Projection, NoisyGeneralEssentialPassesCertificate) {
  const Scene ge = Triplet(Layout::kGeneral, IntrinsicsMode::kCalibrated, 7);
  Eigen::MatrixXd g = ConsistentDense(ge.cameras);
  Rng rng(8);
  Eigen::MatrixXd noise = RandomSymmetric(rng, 9);
  for (int b = 0; b < 3; ++b) noise.block<3, 3>(3 * b, 3 * b).setZero();
  g += 1e-3 * g.norm() * noise;
  const Eigen::MatrixXd p = ProjectGeneralEssential(g).matrix;
  CertificateTolerances tol;
  const ConsistencyCertificate c = CertifyGeneral(p, TensorKind::kEssential, tol);
  EXPECT_TRUE(c.pass);
  EXPECT_LT(c.block_rotation_residual, 1e-10);
}

TEST(Projection, NoisyCollinearEssentialNearClean) {
  const Scene ce = Triplet(Layout::kCollinear, IntrinsicsMode::kCalibrated, 9);
  const Eigen::MatrixXd clean = ConsistentDense(ce.cameras);
  Rng rng(10);
  Eigen::MatrixXd noise = RandomSymmetric(rng, 9);
  const Eigen::MatrixXd p =
      ProjectCollinearEssential(clean + 1e-3 * clean.norm() * noise).matrix;
  EXPECT_LT((p - clean).norm(), 1e-2 * clean.norm());
  // Pairing is exact; the equal-magnitude pattern only holds approximately.
  const Eigen::VectorXd l = Spectrum(p);
  EXPECT_NEAR(l(0), -l(8), 1e-12 * l(0));
  EXPECT_NEAR(l(1), -l(7), 1e-12 * l(0));
  EXPECT_LT(CertifyCollinearEssential(p).pattern_residual, 1e-2);
}

TEST(Projection, DecomposeGeneralEssentialRecoversPoses) {
  SceneSpec spec;
  spec.layout = Layout::kGeneral;
  spec.n_cams = 5;
  spec.seed = 12;
  const Scene s = GenerateScene(spec);
  const Eigen::MatrixXd e = ConsistentDense(s.cameras);
  const EssentialDecomposition d = DecomposeGeneralEssential(e);
  EXPECT_LT((d.consistent - e).norm(), 1e-9 * e.norm());
  // Relative rotations are gauge-free.
  for (int i = 1; i < 5; ++i) {
    const Mat3 got = d.rotations[0].transpose() * d.rotations[i];
    const Mat3 want = s.cameras[0].rotation().transpose() * s.cameras[i].rotation();
    EXPECT_LT((got - want).norm(), 1e-9);
  }
}

}  // namespace
}  // namespace bifocal
