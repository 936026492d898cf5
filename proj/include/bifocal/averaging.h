#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "bifocal/nview.h"
#include "bifocal/projection.h"
#include "bifocal/viewing_graph.h"

namespace bifocal {

enum class Setting { kCollinear, kGeneral };

struct TripletProblem {
  int triplet_id = 0;
  Triplet cameras{};
  Eigen::MatrixXd measured;  // 9x9, unit-normalized blocks, zero diagonal
  Setting setting = Setting::kCollinear;
  TensorKind kind = TensorKind::kEssential;
};

struct AdmmConfig {
  double rho = 1.0;
  int max_iters = 500;
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double rank_tol = 1e-6;
  // After `burn_in` iterations the penalty grows geometrically up to
  // rho_max; with fixed rho the nonconvex iteration can settle into a cycle.
  int burn_in = 50;
  double rho_growth = 1.05;
  double rho_max = 1e8;
  int threads = 1;
};
void ValidateConfig(const AdmmConfig& config);

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;
  double primal = 0.0;
  double dual = 0.0;
};
// {"iteration":..,"objective":..,"primal":..,"dual":..}
std::string FormatRecord(const IterationRecord& record);

struct AveragingResult {
  // Consensus blocks over the cover edges, each unit-normalized.
  NViewBifocal averaged;
  // Per cover triplet: the projection of the final consensus 9x9 matrix, so
  // its blocks carry mutually consistent scales.
  std::vector<Eigen::MatrixXd> triplet_matrices;
  std::vector<IterationRecord> log;
  int iterations = 0;
  bool converged = false;
  double primal = 0.0;
  double dual = 0.0;
};

std::vector<TripletProblem> BuildTripletProblems(const NViewBifocal& measured,
                                                 const TripletCover& cover,
                                                 Setting setting);

// Applies the projection operator of (setting, kind).
ProjectionResult ProjectTriplet(const Eigen::MatrixXd& s, Setting setting,
                                TensorKind kind, double rank_tol);

// Signed scales (s_ab, s_ac, s_bc) making {s_e E_e} of unit-norm blocks a
// consistent general essential triplet, from the closure of the baseline
// triangle.  Unit-norm result; degenerate for collinear triplets.
Eigen::Vector3d EssentialTripletScales(const Mat3& e_ab, const Mat3& e_ac,
                                       const Mat3& e_bc);

// Consensus ADMM: per-triplet copies constrained by the projection of the
// setting, shared blocks attached quadratically to the measured blocks,
// scaled duals.  In the general essential setting the unit-normalized
// measurements are first given consistent signs and relative scales, triplet
// by triplet along the dual graph.  Exhausting max_iters returns the last
// iterate with converged = false.
AveragingResult Average(const NViewBifocal& measured, const TripletCover& cover,
                        Setting setting, const AdmmConfig& config = {});

}  // namespace bifocal
