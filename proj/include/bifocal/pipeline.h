#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bifocal/averaging.h"
#include "bifocal/error.h"
#include "bifocal/io.h"
#include "bifocal/recovery.h"
#include "bifocal/synthetic.h"

namespace bifocal {

enum class Algorithm { kR4, kVC };
enum class Calibration { kCalibrated, kUncalibrated };

struct PipelineConfig {
  Algorithm algorithm = Algorithm::kR4;
  Calibration calibration = Calibration::kCalibrated;
  AdmmConfig admm;
  RecoveryOptions recovery;
  // Triplets scoring below this are collinear.
  double collinearity_threshold = 0.05;
  double epipole_margin = 1e-2;
  // Copy the wall-clock time into the report (which then differs run to run).
  bool record_runtime = false;
};

struct PipelineResult {
  EvalReport report;
  // Real cameras only; virtual cameras are dropped.
  CameraSet cameras;
  // Final cover, including virtual cameras for VC.
  TripletCover cover;
  std::vector<IterationRecord> log;
  double runtime_seconds = 0.0;
  // Set when a stage failed; report.failure_stage names it.
  std::optional<ErrorCode> error;
};

// Real cameras 0..n-1 of a registration; virtual ones are dropped.
CameraSet RealCameras(const Registration& reg, int n, Frame frame);
// Fills n_cameras, n_reconstructed and the error fields of `report`.  Position
// errors need a Euclidean frame, the reference scene and three cameras;
// reprojection errors need tracks.
void Evaluate(const CameraSet& cameras, const Scene* truth, std::span<const Track> tracks,
              EvalReport& report);

// Heuristic cover of the measured edges, enriched when disconnected.
TripletCover BuildCover(const NViewBifocal& measured);
// Collinearity score of each cover triplet from its tensors.
std::vector<double> TripletScores(const NViewBifocal& measured, const TripletCover& cover);
// PreconditionViolated unless every score is below the threshold.
void RequireAllCollinear(const std::vector<double>& scores, double threshold);

struct VirtualAugmentation {
  TripletCover cover;
  // Measured tensors plus the virtual ones, over cover.CameraCount() cameras.
  NViewBifocal tensors;
};
// Replaces the collinear triplets by virtual-camera triplets and builds the
// virtual tensors from the tracks.
VirtualAugmentation InsertVirtualCameras(const NViewBifocal& measured, const TripletCover& cover,
                                         std::span<const Track> tracks, const PipelineConfig& config);

// Cameras of each cover triplet from a 9x9 matrix per triplet: collinear
// recovery for kCollinear, general recovery for kGeneral (calibrated essential
// blocks may carry arbitrary scales; signs are fixed by cheirality).
std::vector<TripletCameras> RecoverTriplets(const std::vector<Eigen::MatrixXd>& matrices,
                                            const TripletCover& cover, Setting setting,
                                            Calibration calibration, std::span<const Track> tracks,
                                            const RecoveryOptions& options = {});

// R4: cover, collinear averaging, collinear triplet recovery, registration.
// VC: cover, virtual cameras for the collinear triplets, general averaging,
// general triplet recovery, registration.  Stage errors are caught and
// reported with whatever was computed before them.  `truth`, when given,
// supplies the reference centers for the position errors (calibrated runs).
PipelineResult RunPipeline(const Measurements& measurements, const Scene* truth,
                           const PipelineConfig& config);

const char* AlgorithmName(Algorithm a);
const char* CalibrationName(Calibration c);

}  // namespace bifocal
