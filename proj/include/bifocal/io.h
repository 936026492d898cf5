#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bifocal/recovery.h"
#include "bifocal/synthetic.h"
#include "bifocal/viewing_graph.h"

namespace bifocal {

// Estimated cameras of a run; `recovered[i]` false leaves camera i unset.
struct CameraSet {
  Frame frame = Frame::kEuclidean;
  std::vector<Mat34> projections;
  std::vector<bool> recovered;
};

struct EvalReport {
  std::string algorithm;  // "r4" | "vc"
  std::string regime;     // "calibrated" | "uncalibrated"
  int n_cameras = 0;
  int n_reconstructed = 0;
  // Euclidean runs only.
  std::optional<double> mean_position_error;
  std::optional<double> median_position_error;
  std::optional<double> mean_reprojection_error;
  int iterations = 0;
  bool converged = false;
  int n_triplets = 0;
  int n_virtual = 0;
  // Empty on success; otherwise the stage that raised and its message.
  std::string failure_stage;
  std::string failure_message;
  // Written only when set, so that reports of identical runs compare equal.
  std::optional<double> runtime_seconds;
};

// JSON text (two-space indent, trailing newline).  Parsers throw
// InvalidArgument on malformed documents.
std::string SceneToJson(const Scene& scene);
Scene SceneFromJson(const std::string& text);
std::string MeasurementsToJson(const Measurements& m);
Measurements MeasurementsFromJson(const std::string& text);
std::string CamerasToJson(const CameraSet& cameras);
CameraSet CamerasFromJson(const std::string& text);
std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(const std::string& text);
std::string CoverToJson(const TripletCover& cover);
TripletCover CoverFromJson(const std::string& text);

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& text);

}  // namespace bifocal
