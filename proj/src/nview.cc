#include "bifocal/nview.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bifocal/error.h"

namespace bifocal {

NViewBifocal NViewBifocal::Assemble(int n, TensorKind kind,
                                    const std::vector<BlockEntry>& blocks,
                                    const AssembleOptions& options) {
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument, "n-view matrix needs n >= 2");
  }
  NViewBifocal m;
  m.n_ = n;
  m.kind_ = kind;
  for (const BlockEntry& b : blocks) {
    if (b.i < 0 || b.j < 0 || b.i >= n || b.j >= n || b.i == b.j) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "block (" + std::to_string(b.i) + "," + std::to_string(b.j) +
                      ") out of range");
    }
    if (!b.matrix.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "block not finite");
    }
    const auto key = std::minmax(b.i, b.j);
    Mat3 value = b.i < b.j ? b.matrix : Mat3(b.matrix.transpose());
    if (m.blocks_.count(key) != 0) {
      throw Error(ErrorCode::kDuplicateEdge,
                  "edge (" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + ") given twice");
    }
    if (options.validate_rank) {
      const Vec3 s = Eigen::JacobiSVD<Mat3>(value).singularValues();
      if (!(s(0) > 0.0) || s(2) > 1e-9 * s(0) || s(1) <= 1e-9 * s(0)) {
        throw Error(ErrorCode::kRankNot2,
                    "block (" + std::to_string(key.first) + "," +
                        std::to_string(key.second) + ") is not rank 2");
      }
    }
    if (options.normalize) value = NormalizeTensor(value);
    m.blocks_.emplace(key, value);
  }
  return m;
}

bool NViewBifocal::HasBlock(int i, int j) const {
  return blocks_.count(std::minmax(i, j)) != 0;
}

Mat3 NViewBifocal::Block(int i, int j) const {
  const auto it = blocks_.find(std::minmax(i, j));
  if (i == j) return Mat3::Zero();
  if (it == blocks_.end()) {
    throw Error(ErrorCode::kMissingBlock, "missing block (" + std::to_string(i) +
                                              "," + std::to_string(j) + ")");
  }
  return i < j ? it->second : Mat3(it->second.transpose());
}

std::vector<std::pair<int, int>> NViewBifocal::Edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(blocks_.size());
  for (const auto& [key, value] : blocks_) out.push_back(key);
  return out;
}

Eigen::MatrixXd NViewBifocal::Dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3 * n_, 3 * n_);
  for (const auto& [key, value] : blocks_) {
    d.block<3, 3>(3 * key.first, 3 * key.second) = value;
    d.block<3, 3>(3 * key.second, 3 * key.first) = value.transpose();
  }
  return d;
}

Eigen::MatrixXd NViewBifocal::Submatrix(const std::vector<int>& cameras) const {
  const int k = static_cast<int>(cameras.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3 * k, 3 * k);
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      const Mat3 block = Block(cameras[a], cameras[b]);
      d.block<3, 3>(3 * a, 3 * b) = block;
      d.block<3, 3>(3 * b, 3 * a) = block.transpose();
    }
  }
  return d;
}

NViewBifocal FromDense(const Eigen::MatrixXd& dense, TensorKind kind,
                       const AssembleOptions& options) {
  if (dense.rows() != dense.cols() || dense.rows() % 3 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "dense matrix must be 3n x 3n");
  }
  const int n = static_cast<int>(dense.rows() / 3);
  std::vector<BlockEntry> blocks;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Mat3 upper = dense.block<3, 3>(3 * i, 3 * j);
      const Mat3 lower = dense.block<3, 3>(3 * j, 3 * i);
      blocks.push_back({i, j, 0.5 * (upper + lower.transpose())});
    }
  }
  return NViewBifocal::Assemble(n, kind, blocks, options);
}

SpectralPair SvdSpectralMap(const Eigen::MatrixXd& u_hat,
                            const Eigen::MatrixXd& v_hat,
                            const Eigen::Matrix2d& sigma) {
  if (u_hat.rows() != v_hat.rows() || u_hat.cols() != 2 || v_hat.cols() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "expected two 3n x 2 matrices");
  }
  if (!(sigma(0, 0) > 0.0 && sigma(1, 1) > 0.0) || sigma(0, 1) != 0.0 ||
      sigma(1, 0) != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "sigma must be positive diagonal");
  }
  Eigen::MatrixXd uv(u_hat.rows(), 4);
  uv << u_hat, v_hat;
  const Eigen::MatrixXd gram = uv.transpose() * uv;
  if ((gram - Eigen::MatrixXd::Identity(4, 4)).norm() > 1e-9) {
    throw Error(ErrorCode::kNotOrthonormal, "columns of [U V] not orthonormal");
  }
  const double h = std::sqrt(0.5);
  return {h * (u_hat + v_hat), h * (v_hat - u_hat)};
}

SpectralPair SpectralSvdMap(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const double h = std::sqrt(0.5);
  return {h * (x - y), h * (x + y)};
}

namespace {

struct SortedEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
};

SortedEigen DescendingEigen(const Eigen::MatrixXd& symmetric) {
  const Eigen::MatrixXd s = 0.5 * (symmetric + symmetric.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
  const Eigen::Index n = s.rows();
  SortedEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  (void)n;
  return out;
}

struct Spectrum {
  SortedEigen eig;
  double max_abs = 0.0;
  int rank = 0;
  int positives = 0;
  int negatives = 0;
};

Spectrum Analyze(const Eigen::MatrixXd& dense, double rank_tol) {
  Spectrum s;
  s.eig = DescendingEigen(dense);
  s.max_abs = s.eig.values.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < s.eig.values.size(); ++k) {
    const double v = s.eig.values(k);
    if (std::abs(v) > rank_tol * s.max_abs) {
      ++s.rank;
      if (v > 0) ++s.positives;
      else ++s.negatives;
    }
  }
  return s;
}

void FillSpectrum(const Spectrum& s, ConsistencyCertificate* c) {
  c->eigenvalues.assign(s.eig.values.data(),
                        s.eig.values.data() + s.eig.values.size());
  c->rank_estimate = s.rank;
  c->signature = {s.positives, s.negatives};
}

// Top-k positive eigenvectors (descending) and most negative (ascending).
SpectralPair PairedEigenvectors(const SortedEigen& eig, int k) {
  const Eigen::Index n = eig.values.size();
  SpectralPair p;
  p.x = eig.vectors.leftCols(k);
  p.y.resize(n, k);
  for (int c = 0; c < k; ++c) p.y.col(c) = eig.vectors.col(n - 1 - c);
  return p;
}

Eigen::Matrix2d PlaneQ(double theta, bool reflect) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d q;
  if (reflect) q << c, s, s, -c;
  else q << c, -s, s, c;
  return q;
}

Eigen::Matrix2d PlaneQDerivative(double theta, bool reflect) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d q;
  if (reflect) q << -s, c, c, s;
  else q << -s, -c, c, -s;
  return q;
}

// Residual blocks Vi^T Vi - I/n of V = sqrt(.5)(X + Y Q) and their
// derivative with respect to the angle of Q.
double OrthogonalityObjective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              double theta, bool reflect, double* gradient,
                              double* curvature, double* max_residual) {
  const int n = static_cast<int>(x.rows() / 3);
  const double h = std::sqrt(0.5);
  const Eigen::MatrixXd v = h * (x + y * PlaneQ(theta, reflect));
  const Eigen::MatrixXd dv = h * (y * PlaneQDerivative(theta, reflect));
  double f = 0.0, g = 0.0, hh = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Matrix<double, 3, 2> vi = v.middleRows<3>(3 * i);
    const Eigen::Matrix<double, 3, 2> dvi = dv.middleRows<3>(3 * i);
    const Eigen::Matrix2d r =
        vi.transpose() * vi - Eigen::Matrix2d::Identity() / n;
    const Eigen::Matrix2d dr = dvi.transpose() * vi + vi.transpose() * dvi;
    f += r.squaredNorm();
    g += (r.array() * dr.array()).sum();
    hh += dr.squaredNorm();
    worst = std::max(worst, r.norm());
  }
  if (gradient) *gradient = g;
  if (curvature) *curvature = hh;
  if (max_residual) *max_residual = worst;
  return f;
}

}  // namespace

SpectralPair FactorTwoPlusTwoMinus(const Eigen::MatrixXd& symmetric,
                                   double rank_tol) {
  const Spectrum s = Analyze(symmetric, rank_tol);
  if (s.rank != 4 || s.positives != 2 || s.negatives != 2) {
    throw Error(ErrorCode::kInvalidArgument, "matrix is not rank 4 with (2,2)");
  }
  const SpectralPair p = PairedEigenvectors(s.eig, 2);
  const Eigen::Index n = s.eig.values.size();
  Eigen::MatrixXd x = p.x;
  Eigen::MatrixXd y = p.y;
  x.col(0) *= std::sqrt(s.eig.values(0));
  x.col(1) *= std::sqrt(s.eig.values(1));
  y.col(0) *= std::sqrt(-s.eig.values(n - 1));
  y.col(1) *= std::sqrt(-s.eig.values(n - 2));
  return SpectralSvdMap(x, y);
}

WellformedReport CheckNViewWellformed(const NViewBifocal& m, double rank_tol,
                                      double equality_tol) {
  WellformedReport report;
  report.pass = true;
  for (const auto& [key, value] : m.blocks()) {
    BlockReport b;
    b.i = key.first;
    b.j = key.second;
    b.singular_values = Eigen::JacobiSVD<Mat3>(value).singularValues();
    const Vec3& s = b.singular_values;
    b.rank_two = s(0) > 0.0 && s(2) <= rank_tol * s(0) && s(1) > rank_tol * s(0);
    b.equal_singular_values = std::abs(s(0) - s(1)) <= equality_tol * s(0);
    const bool ok = b.rank_two && (m.kind() == TensorKind::kFundamental ||
                                   b.equal_singular_values);
    if (!ok) {
      report.pass = false;
      report.failing.push_back(key);
    }
    report.blocks.push_back(b);
  }
  return report;
}

std::vector<int> BlockRowRanks(const Eigen::MatrixXd& dense, double rank_tol) {
  const int n = static_cast<int>(dense.rows() / 3);
  std::vector<int> ranks(n, 0);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd row = dense.middleRows(3 * i, 3);
    const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(row).singularValues();
    int r = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s(k) > rank_tol * s(0)) ++r;
    }
    ranks[i] = s(0) > 0.0 ? r : 0;
  }
  return ranks;
}

ConsistencyCertificate CertifyCollinearEssential(
    const Eigen::MatrixXd& dense, const CertificateTolerances& tol) {
  ConsistencyCertificate c;
  c.regime = Regime::kCollinearEssential;
  c.tolerances = tol;
  const Spectrum s = Analyze(dense, tol.rank_tol);
  FillSpectrum(s, &c);
  c.block_row_ranks = BlockRowRanks(dense, tol.rank_tol);
  const Eigen::Index dim = s.eig.values.size();
  const int n = static_cast<int>(dim / 3);
  if (dim < 4 || !(s.max_abs > 0.0)) {
    c.pattern_residual = c.orthogonality_residual = 1.0;
    return c;
  }
  const Eigen::VectorXd& l = s.eig.values;
  const double l1 = l(0), l2 = l(1), l3 = l(dim - 2), l4 = l(dim - 1);
  c.pattern_residual = std::max({std::abs(l1 - l2), std::abs(l1 + l4),
                                 std::abs(l2 + l3), std::abs(l3 - l4)}) /
                       s.max_abs;
  c.condition1 = s.rank == 4 && s.positives == 2 && s.negatives == 2 &&
                 c.pattern_residual < tol.residual_tol;

  // Each 2-D eigenspace carries its own basis; search the relative
  // orthogonal transform Q of Y that best satisfies Vi^T Vi = I/n.
  const SpectralPair p = PairedEigenvectors(s.eig, 2);
  double best_f = std::numeric_limits<double>::infinity();
  double best_theta = 0.0;
  bool best_reflect = false;
  constexpr int kGrid = 360;
  for (bool reflect : {false, true}) {
    for (int g = 0; g < kGrid; ++g) {
      const double theta = 2.0 * std::numbers::pi * g / kGrid;
      const double f =
          OrthogonalityObjective(p.x, p.y, theta, reflect, nullptr, nullptr, nullptr);
      if (f < best_f) {
        best_f = f;
        best_theta = theta;
        best_reflect = reflect;
      }
    }
  }
  for (int it = 0; it < 100; ++it) {
    double g = 0.0, h = 0.0;
    OrthogonalityObjective(p.x, p.y, best_theta, best_reflect, &g, &h, nullptr);
    if (!(h > 0.0)) break;
    const double step = g / h;
    best_theta -= step;
    if (std::abs(step) < 1e-16) break;
  }
  double worst = 0.0;
  OrthogonalityObjective(p.x, p.y, best_theta, best_reflect, nullptr, nullptr, &worst);
  c.orthogonality_residual = worst;
  c.v_hat = std::sqrt(0.5) * (p.x + p.y * PlaneQ(best_theta, best_reflect));
  c.condition2 = worst < tol.residual_tol;
  c.pass = c.condition1 && c.condition2;
  (void)n;
  return c;
}

ConsistencyCertificate CertifyCollinearEssential(const NViewBifocal& m,
                                                 const CertificateTolerances& tol) {
  return CertifyCollinearEssential(m.Dense(), tol);
}

ConsistencyCertificate CertifyCollinearFundamental(
    const Eigen::MatrixXd& dense, const CertificateTolerances& tol) {
  ConsistencyCertificate c;
  c.regime = Regime::kCollinearFundamental;
  c.tolerances = tol;
  const Spectrum s = Analyze(dense, tol.rank_tol);
  FillSpectrum(s, &c);
  c.block_row_ranks = BlockRowRanks(dense, tol.rank_tol);
  c.condition1 = s.rank == 4 && s.positives == 2 && s.negatives == 2;
  c.condition2 = std::all_of(c.block_row_ranks.begin(), c.block_row_ranks.end(),
                             [](int r) { return r == 2; });
  c.pass = c.condition1 && c.condition2;
  return c;
}

ConsistencyCertificate CertifyCollinearFundamental(
    const NViewBifocal& m, const CertificateTolerances& tol) {
  return CertifyCollinearFundamental(m.Dense(), tol);
}

RotationBlocks ExtractRotationBlocks(const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& y) {
  const int n = static_cast<int>(x.rows() / 3);
  const double scale = std::sqrt(n / 2.0);
  RotationBlocks best;
  best.residual = std::numeric_limits<double>::infinity();
  for (int pattern = 0; pattern < 8; ++pattern) {
    Eigen::Matrix3d signs = Eigen::Matrix3d::Identity();
    for (int k = 0; k < 3; ++k) {
      if (pattern & (1 << k)) signs(k, k) = -1.0;
    }
    Eigen::MatrixXd blocks = scale * (x + y * signs);
    double det_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      det_sum += Mat3(blocks.middleRows<3>(3 * i)).determinant();
    }
    if (det_sum < 0.0) blocks.col(2) *= -1.0;
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      const Mat3 b = blocks.middleRows<3>(3 * i);
      residual = std::max(residual, (b - ProjectToRotation(b)).norm());
    }
    if (residual < best.residual) {
      best.residual = residual;
      best.blocks = blocks;
    }
  }
  return best;
}

ConsistencyCertificate CertifyGeneral(const Eigen::MatrixXd& dense,
                                      TensorKind kind,
                                      const CertificateTolerances& tol) {
  ConsistencyCertificate c;
  c.regime = kind == TensorKind::kEssential ? Regime::kGeneralEssential
                                            : Regime::kGeneralFundamental;
  c.tolerances = tol;
  const Spectrum s = Analyze(dense, tol.rank_tol);
  FillSpectrum(s, &c);
  c.block_row_ranks = BlockRowRanks(dense, tol.rank_tol);
  c.condition1 = s.rank == 6 && s.positives == 3 && s.negatives == 3;
  const Eigen::Index dim = s.eig.values.size();
  if (kind == TensorKind::kFundamental || dim < 6 || !(s.max_abs > 0.0)) {
    c.condition2 = kind == TensorKind::kFundamental;
    c.pass = c.condition1 && c.condition2;
    return c;
  }
  const Eigen::VectorXd& l = s.eig.values;
  double pairing = 0.0;
  for (int k = 0; k < 3; ++k) {
    pairing = std::max(pairing, std::abs(l(k) + l(dim - 1 - k)));
  }
  c.pattern_residual = pairing / s.max_abs;
  const SpectralPair p = PairedEigenvectors(s.eig, 3);
  const RotationBlocks rb = ExtractRotationBlocks(p.x, p.y);
  c.block_rotation_residual = rb.residual;
  c.v_hat = rb.blocks;
  c.condition2 =
      c.pattern_residual < tol.residual_tol && rb.residual < tol.residual_tol;
  c.pass = c.condition1 && c.condition2;
  return c;
}

ConsistencyCertificate CertifyGeneral(const NViewBifocal& m,
                                      const CertificateTolerances& tol) {
  return CertifyGeneral(m.Dense(), m.kind(), tol);
}

}  // namespace bifocal
