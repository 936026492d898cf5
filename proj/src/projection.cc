#include "bifocal/projection.h"

#include <algorithm>

#include <Eigen/Eigenvalues>

#include "bifocal/error.h"
#include "bifocal/nview.h"

namespace bifocal {
namespace {

struct Eig {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;
  bool deficient = false;
};

Eig Decompose(const Eigen::MatrixXd& s, int k, double rank_tol) {
  if (s.rows() != s.cols() || s.rows() < 2 * k) {
    throw Error(ErrorCode::kInvalidArgument, "matrix too small for projection");
  }
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  Eig e;
  e.values = solver.eigenvalues().reverse();
  e.vectors = solver.eigenvectors().rowwise().reverse();
  const double max_abs = e.values.cwiseAbs().maxCoeff();
  int pos = 0, neg = 0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (e.values(i) > rank_tol * max_abs) ++pos;
    if (e.values(i) < -rank_tol * max_abs) ++neg;
  }
  e.deficient = pos < k || neg < k;
  return e;
}

Eigen::MatrixXd Rebuild(const Eig& e, int k, const Eigen::VectorXd& top,
                        const Eigen::VectorXd& bottom) {
  const Eigen::Index n = e.values.size();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd& vp = e.vectors.col(c);
    const Eigen::VectorXd& vn = e.vectors.col(n - 1 - c);
    out.noalias() += top(c) * vp * vp.transpose();
    out.noalias() += bottom(c) * vn * vn.transpose();
  }
  return 0.5 * (out + out.transpose());
}

// Eigen-truncation keeping k extremal eigenpairs on each side.  With
// `paired`, each top/bottom pair (l_c, l_{n-1-c}) becomes (m, -m) with
// m = (l_c - l_{n-1-c}) / 2.
ProjectionResult Truncate(const Eigen::MatrixXd& s, int k, bool paired,
                          double rank_tol, Eig* eig_out = nullptr) {
  Eig e = Decompose(s, k, rank_tol);
  const Eigen::Index n = e.values.size();
  Eigen::VectorXd top(k), bottom(k);
  for (int c = 0; c < k; ++c) {
    top(c) = e.values(c);
    bottom(c) = e.values(n - 1 - c);
    if (paired) {
      const double m = 0.5 * (top(c) - bottom(c));
      top(c) = m;
      bottom(c) = -m;
    }
  }
  ProjectionResult r{Rebuild(e, k, top, bottom), e.deficient};
  if (eig_out) *eig_out = std::move(e);
  return r;
}

}  // namespace

ProjectionResult ProjectCollinearEssential(const Eigen::MatrixXd& s,
                                           double rank_tol) {
  return Truncate(s, 2, true, rank_tol);
}

ProjectionResult ProjectCollinearEssentialEqual(const Eigen::MatrixXd& s,
                                                double rank_tol) {
  Eig e = Decompose(s, 2, rank_tol);
  const Eigen::Index n = e.values.size();
  const double m =
      0.25 * (e.values(0) + e.values(1) - e.values(n - 2) - e.values(n - 1));
  const Eigen::Vector2d top(m, m), bottom(-m, -m);
  return {Rebuild(e, 2, top, bottom), e.deficient};
}

ProjectionResult ProjectCollinearFundamental(const Eigen::MatrixXd& s,
                                             double rank_tol) {
  return Truncate(s, 2, false, rank_tol);
}

ProjectionResult ProjectGeneralFundamental(const Eigen::MatrixXd& s,
                                           double rank_tol) {
  return Truncate(s, 3, false, rank_tol);
}

Eigen::MatrixXd EssentialFromPoses(const std::vector<Mat3>& rotations,
                                   const std::vector<Vec3>& centers) {
  const int n = static_cast<int>(rotations.size());
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      e.block<3, 3>(3 * i, 3 * j) = rotations[i].transpose() *
                                    Skew(centers[i] - centers[j]) * rotations[j];
    }
  }
  return e;
}

namespace {

EssentialDecomposition FitPoses(const Eigen::MatrixXd& s,
                                const RotationBlocks& rb) {
  const int n = static_cast<int>(s.rows() / 3);
  EssentialDecomposition d;
  d.rotation_residual = rb.residual;
  d.rotations.resize(n);
  for (int i = 0; i < n; ++i) {
    // Blocks approximate R_i^T up to a global rotation.
    d.rotations[i] = ProjectToRotation(rb.blocks.middleRows<3>(3 * i)).transpose();
  }
  // With rotations fixed, |R_i^T [t_i - t_j]x R_j - S_ij|^2 separates into
  // |t_i - t_j - w_ij|^2 with w_ij = R_i vex(S_ij R_j^T R_i) plus a constant.
  // On the complete graph the zero-mean minimizer is t_i = mean_j w_ij.
  const auto fit_centers = [&] {
    d.centers.assign(n, Vec3::Zero());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const Mat3 sij = s.block<3, 3>(3 * i, 3 * j);
        const Vec3 w = d.rotations[i] *
                       Vex(sij * d.rotations[j].transpose() * d.rotations[i]);
        d.centers[i] += w / n;
      }
    }
  };
  fit_centers();
  // The eigenvector rotations are only a starting point; alternate nearest
  // rotations R_i = argmax tr(R^T sum_j [t_i - t_j]x R_j S_ij^T) with center
  // refits.  Each sweep cannot increase the fit, and the objective itself
  // only resolves the minimizer to sqrt(eps), so stop on the step size.
  double scale = 0.0;
  for (const Vec3& c : d.centers) scale = std::max(scale, c.norm());
  for (int sweep = 0; sweep < 500 && scale > 0.0; ++sweep) {
    double step = 0.0;
    for (int i = 0; i < n; ++i) {
      Mat3 m = Mat3::Zero();
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        m += Skew(d.centers[i] - d.centers[j]) * d.rotations[j] *
             s.block<3, 3>(3 * i, 3 * j).transpose();
      }
      if (m.squaredNorm() == 0.0) continue;
      const Mat3 r = ProjectToRotation(m);
      step = std::max(step, (r - d.rotations[i]).norm());
      d.rotations[i] = r;
    }
    const std::vector<Vec3> centers = d.centers;
    fit_centers();
    for (int i = 0; i < n; ++i) step = std::max(step, (d.centers[i] - centers[i]).norm() / scale);
    if (step < 1e-14) break;
  }
  d.consistent = EssentialFromPoses(d.rotations, d.centers);
  return d;
}

}  // namespace

EssentialDecomposition DecomposeGeneralEssential(const Eigen::MatrixXd& s) {
  Eig e;
  const ProjectionResult truncated = Truncate(s, 3, true, 1e-6, &e);
  const Eigen::Index n = e.values.size();
  Eigen::MatrixXd x = e.vectors.leftCols(3);
  Eigen::MatrixXd y(n, 3);
  for (int c = 0; c < 3; ++c) y.col(c) = e.vectors.col(n - 1 - c);
  return FitPoses(truncated.matrix, ExtractRotationBlocks(x, y));
}

ProjectionResult ProjectGeneralEssential(const Eigen::MatrixXd& s,
                                         double rank_tol) {
  Eig e;
  const ProjectionResult truncated = Truncate(s, 3, true, rank_tol, &e);
  const Eigen::Index n = e.values.size();
  Eigen::MatrixXd x = e.vectors.leftCols(3);
  Eigen::MatrixXd y(n, 3);
  for (int c = 0; c < 3; ++c) y.col(c) = e.vectors.col(n - 1 - c);
  const EssentialDecomposition d =
      FitPoses(truncated.matrix, ExtractRotationBlocks(x, y));
  return {d.consistent, truncated.signature_deficient};
}

}  // namespace bifocal
