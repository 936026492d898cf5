#pragma once

#include <vector>

#include <Eigen/Core>

#include "bifocal/geometry.h"

namespace bifocal {

struct ProjectionResult {
  Eigen::MatrixXd matrix;
  // Input lacked the required count of positive or negative eigenvalues
  // above the rank tolerance; the extremal eigenpairs were used anyway.
  bool signature_deficient = false;
};

// Rank 4, spectrum (a, b, -b, -a) with a = (l1 - l4)/2, b = (l2 - l3)/2.
ProjectionResult ProjectCollinearEssential(const Eigen::MatrixXd& s,
                                           double rank_tol = 1e-6);
// Rank 4, spectrum (m, m, -m, -m) with m the mean of (l1, l2, -l3, -l4):
// the full eigenvalue pattern of a consistent collinear essential matrix.
ProjectionResult ProjectCollinearEssentialEqual(const Eigen::MatrixXd& s,
                                                double rank_tol = 1e-6);
// Rank 4, two largest positive and two most negative eigenvalues kept.
ProjectionResult ProjectCollinearFundamental(const Eigen::MatrixXd& s,
                                             double rank_tol = 1e-6);
// Rank 6 with paired spectrum, then block-rotation structure: the nearest
// matrix R_i^T [t_i - t_j]x R_j given the rotations read off sqrt(.5)(X+Y).
ProjectionResult ProjectGeneralEssential(const Eigen::MatrixXd& s,
                                         double rank_tol = 1e-6);
// Rank 6, three largest positive and three most negative eigenvalues kept.
ProjectionResult ProjectGeneralFundamental(const Eigen::MatrixXd& s,
                                           double rank_tol = 1e-6);

// Rotations R_i and centers t_i (summing to zero) of the consistent essential
// matrix closest to `s` once the rotations are fixed from its rank-6 paired
// eigenstructure.  `consistent` is the rebuilt matrix.
struct EssentialDecomposition {
  std::vector<Mat3> rotations;
  std::vector<Vec3> centers;
  Eigen::MatrixXd consistent;
  double rotation_residual = 0.0;
};
EssentialDecomposition DecomposeGeneralEssential(const Eigen::MatrixXd& s);

// Essential matrix with blocks R_i^T [t_i - t_j]x R_j.
Eigen::MatrixXd EssentialFromPoses(const std::vector<Mat3>& rotations,
                                   const std::vector<Vec3>& centers);

}  // namespace bifocal
