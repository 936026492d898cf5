#pragma once

#include <array>
#include <span>
#include <vector>

#include "bifocal/geometry.h"
#include "bifocal/nview.h"
#include "bifocal/recovery.h"
#include "bifocal/viewing_graph.h"

namespace bifocal {

// Tensors of one triplet in slot order (0,1), (0,2), (1,2), with
// x_a^T F_ab x_b = 0.
using TripletBlocks = std::array<Mat3, 3>;

// Index into `tracks` of the three-view track of `cameras` whose points stay
// at least `epipole_margin` (image units) from both epipoles in every view
// and whose summed symmetric epipolar distance is smallest; ties go to the
// lower index.
int SelectVirtualPoint(std::span<const Track> tracks, const Triplet& cameras,
                       const TripletBlocks& tensors, double epipole_margin = 1e-2);

// Unit-normalized [x_i]x V_i,s for i = 0, 1, 2: the tensors between each
// camera and a virtual camera at the track's point with the orientation of
// camera `source`, oriented x_i^T F_iX x_X = 0.  Calibrated: V_i,s = R_i^T R_s
// from the essential blocks, choosing among the candidates by cheirality
// over the pairwise tracks.
std::array<Mat3, 3> VirtualBifocalsCalibrated(const TripletBlocks& essentials,
                                              const Triplet& cameras, const Track& point,
                                              std::span<const Track> tracks, int source = 1);
// Projective: V_i,s = A_i A_s^{-1} from recovered cameras P_i = [A_i | a_i].
std::array<Mat3, 3> VirtualBifocalsProjective(const TripletCameras& recovered,
                                              const Track& point, int source = 1);

// Camera P_n with P_k^T F_kn P_n skew-symmetric for each known camera P_k
// (x_k^T F_kn x_n = 0).  Needs two known cameras not collinear with the new
// center.
Mat34 ResectFromBifocals(std::span<const Mat34> known, std::span<const Mat3> tensors);

// 4-view matrix over (0, 1, 2, X) from the real and virtual blocks, with
// block scales chosen so the matrix is consistent: essential blocks through
// the baseline triangles of the triplets containing X, fundamental blocks
// through a projective reconstruction.
NViewBifocal FourViewMatrix(const TripletBlocks& real, const std::array<Mat3, 3>& virtual_blocks,
                            TensorKind kind);

}  // namespace bifocal
