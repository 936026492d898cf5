#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bifocal/geometry.h"

namespace bifocal {

struct BlockEntry {
  int i = 0;
  int j = 0;
  Mat3 matrix;
};

struct AssembleOptions {
  // Store blocks with unit Frobenius norm and sign convention.
  bool normalize = true;
  // Reject blocks whose numerical rank is not 2.
  bool validate_rank = true;
};

// Symmetric 3n x 3n block matrix of pairwise bifocal tensors.  Only blocks
// (i, j) with i < j are stored; block (j, i) is the transpose and the
// diagonal blocks are zero.
class NViewBifocal {
 public:
  NViewBifocal() = default;

  static NViewBifocal Assemble(int n, TensorKind kind,
                               const std::vector<BlockEntry>& blocks,
                               const AssembleOptions& options = {});

  int n() const { return n_; }
  TensorKind kind() const { return kind_; }
  bool HasBlock(int i, int j) const;
  // Block (i, j) for any i != j; throws MissingBlock when absent.
  Mat3 Block(int i, int j) const;
  const std::map<std::pair<int, int>, Mat3>& blocks() const { return blocks_; }
  std::vector<std::pair<int, int>> Edges() const;

  Eigen::MatrixXd Dense() const;
  // 3k x 3k matrix over the listed cameras; every pair must be present.
  Eigen::MatrixXd Submatrix(const std::vector<int>& cameras) const;

 private:
  int n_ = 0;
  TensorKind kind_ = TensorKind::kFundamental;
  std::map<std::pair<int, int>, Mat3> blocks_;
};

// Dense symmetric matrix assembled from a 3k x 3k array with zero diagonal
// blocks; off-diagonal blocks are kept as given.
NViewBifocal FromDense(const Eigen::MatrixXd& dense, TensorKind kind,
                       const AssembleOptions& options = {});

struct SpectralPair {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
};

// (U, V) -> (X, Y) with X = sqrt(.5)(U + V), Y = sqrt(.5)(V - U).  Requires
// the columns of [U V] to be orthonormal.
SpectralPair SvdSpectralMap(const Eigen::MatrixXd& u_hat,
                            const Eigen::MatrixXd& v_hat,
                            const Eigen::Matrix2d& sigma);
// Inverse map: U = sqrt(.5)(X - Y), V = sqrt(.5)(X + Y).
SpectralPair SpectralSvdMap(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// F = U V^T + V U^T from the two positive and two negative eigenpairs of a
// rank-4 symmetric matrix with signature (2, 2).
SpectralPair FactorTwoPlusTwoMinus(const Eigen::MatrixXd& symmetric,
                                   double rank_tol = 1e-6);

struct BlockReport {
  int i = 0;
  int j = 0;
  Vec3 singular_values;
  bool rank_two = false;
  bool equal_singular_values = false;
};

struct WellformedReport {
  bool pass = false;
  std::vector<BlockReport> blocks;
  std::vector<std::pair<int, int>> failing;
};

WellformedReport CheckNViewWellformed(const NViewBifocal& m,
                                      double rank_tol = 1e-9,
                                      double equality_tol = 1e-9);

enum class Regime {
  kCollinearEssential,
  kCollinearFundamental,
  kGeneralEssential,
  kGeneralFundamental,
};

struct CertificateTolerances {
  double rank_tol = 1e-6;      // |lambda| > rank_tol * |lambda|_max counts
  double residual_tol = 1e-6;  // pattern / orthogonality / rotation residuals
};

struct ConsistencyCertificate {
  Regime regime = Regime::kGeneralFundamental;
  std::vector<double> eigenvalues;  // descending
  int rank_estimate = 0;
  std::pair<int, int> signature{0, 0};
  std::vector<int> block_row_ranks;
  double pattern_residual = 0.0;        // relative eigenvalue pattern error
  double orthogonality_residual = 0.0;  // max_i |Vi^T Vi - I/n|_F
  double block_rotation_residual = 0.0;
  bool condition1 = false;
  bool condition2 = false;
  bool pass = false;
  CertificateTolerances tolerances;
  // Collinear essential: the 3n x 2 matrix sqrt(.5)(X + Y) in the basis that
  // minimizes the orthogonality residual.  General essential: the 3n x 3
  // matrix of rotation blocks.
  Eigen::MatrixXd v_hat;
};

ConsistencyCertificate CertifyCollinearEssential(
    const Eigen::MatrixXd& dense, const CertificateTolerances& tol = {});
ConsistencyCertificate CertifyCollinearEssential(
    const NViewBifocal& m, const CertificateTolerances& tol = {});

ConsistencyCertificate CertifyCollinearFundamental(
    const Eigen::MatrixXd& dense, const CertificateTolerances& tol = {});
ConsistencyCertificate CertifyCollinearFundamental(
    const NViewBifocal& m, const CertificateTolerances& tol = {});

ConsistencyCertificate CertifyGeneral(const Eigen::MatrixXd& dense,
                                      TensorKind kind,
                                      const CertificateTolerances& tol = {});
ConsistencyCertificate CertifyGeneral(const NViewBifocal& m,
                                      const CertificateTolerances& tol = {});

// Rotation blocks of a rank-6 essential matrix.  Returns the 3n x 3 matrix of
// blocks sqrt(n/2)(X_i + Y_i S) over the best of the eight column-sign
// patterns S, with a common reflection applied when needed, and the max
// distance of a block from SO(3).
struct RotationBlocks {
  Eigen::MatrixXd blocks;
  double residual = 0.0;
};
RotationBlocks ExtractRotationBlocks(const Eigen::MatrixXd& x,
                                     const Eigen::MatrixXd& y);

// Numerical rank of each 3 x 3n block row.
std::vector<int> BlockRowRanks(const Eigen::MatrixXd& dense, double rank_tol);

}  // namespace bifocal
