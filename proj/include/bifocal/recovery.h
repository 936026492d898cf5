#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bifocal/geometry.h"
#include "bifocal/nview.h"
#include "bifocal/viewing_graph.h"

namespace bifocal {

enum class Frame { kEuclidean, kProjective };

// Cameras of one triplet in a local gauge.  Euclidean: camera 0 has R = I and
// center 0, `rotations`/`centers` are filled and `alpha` is the position of
// camera 2 along the line in units of camera 1's.  Projective: camera 1 is
// [I | 0] and `a` is the free 4-vector of camera 2.
struct TripletCameras {
  int triplet_id = 0;
  Triplet cameras{};
  Frame frame = Frame::kEuclidean;
  std::array<Mat34, 3> projections{Mat34::Zero(), Mat34::Zero(), Mat34::Zero()};
  std::array<Mat3, 3> rotations{Mat3::Identity(), Mat3::Identity(), Mat3::Identity()};
  std::array<Vec3, 3> centers{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  double alpha = 0.0;
  Vec4 a = Vec4::Zero();
};

struct RecoveryOptions {
  // Spectral part of the collinear certificate (rank 4, lambda, lambda,
  // -lambda, -lambda).  The block scales are not checked: averaged blocks are
  // unit-normalized and the scales along the line come from the tracks.
  double certificate_tol = 1e-6;
  double cycle_tol = 1e-6;
};

// Calibrated collinear triplet from a 9x9 essential matrix over `cameras`
// (ascending ids).  Tracks use global view ids in normalized coordinates;
// pairwise tracks drive cheirality, tracks seen by all three views fix alpha.
TripletCameras RecoverCalibratedCollinearTriplet(const Eigen::MatrixXd& essential,
                                                 const Triplet& cameras,
                                                 std::span<const Track> tracks,
                                                 const RecoveryOptions& options = {});

// Projective collinear triplet from F_01, F_12, F_02 (x_a^T F_ab x_b = 0)
// over `cameras`.  Camera 1 is [I | 0], camera 0 is [[e]x F_01 | e] with
// e^T F_01 = 0, camera 2 is [[e']x F_12^T | 0] + e' a^T with F_12 e' = 0 and
// a fitted to the three-view tracks.  Each track constrains only X^T a, so
// at least four are needed.
TripletCameras RecoverProjectiveCollinearTriplet(const Mat3& f01, const Mat3& f12,
                                                 const Mat3& f02, const Triplet& cameras,
                                                 std::span<const Track> tracks);

// Brings the triplets, one per cover triplet in cover order, to a common frame
// by BFS over the dual graph from triplet 0.  Euclidean: similarities from the
// shared cameras, repeated cameras averaged (chordal mean rotation, mean
// center).  Projective: 4x4 homographies, first visit wins.  Returns one
// projection per camera id; cameras outside the cover stay zero.
struct Registration {
  std::vector<Mat34> projections;
  std::vector<Mat3> rotations;  // Euclidean only
  std::vector<Vec3> centers;    // Euclidean only
  std::vector<bool> recovered;
  // Max over revisits of the disagreement with the kept camera.
  double revisit_residual = 0.0;
};
Registration RegisterGlobal(const std::vector<TripletCameras>& triplets,
                            const TripletCover& cover, Frame frame);

}  // namespace bifocal
