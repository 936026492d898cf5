#include "bifocal/pipeline.h"

#include <chrono>
#include <cmath>
#include <string>

#include "bifocal/metrics.h"
#include "bifocal/projection.h"
#include "bifocal/viewing_graph.h"
#include "bifocal/virtual_cameras.h"

namespace bifocal {
namespace {

struct StageError {
  std::string stage;
  Error error;
};

template <typename F>
auto Stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw StageError{name, e};
  }
}

TripletBlocks BlocksOf(const NViewBifocal& m, const Triplet& t) {
  return {m.Block(t[0], t[1]), m.Block(t[0], t[2]), m.Block(t[1], t[2])};
}

TripletBlocks BlocksOf(const Eigen::MatrixXd& s) {
  return {s.block<3, 3>(0, 3), s.block<3, 3>(0, 6), s.block<3, 3>(3, 6)};
}

Mat34 EuclideanProjection(const Mat3& r, const Vec3& c) {
  Mat34 p;
  p << r.transpose(), -r.transpose() * c;
  return p;
}

// Real-view observations of `track` among the triplet's cameras, relabelled
// to local slots; empty when fewer than two.
Track LocalTrack(const Track& track, const Triplet& cameras) {
  Track out;
  for (int k = 0; k < 3; ++k) {
    const int idx = track.IndexOf(cameras[k]);
    if (idx < 0) continue;
    out.view_ids.push_back(k);
    out.points.push_back(track.points[idx]);
  }
  if (out.view_ids.size() < 2) out = Track{};
  return out;
}

// Positive-depth count of the tracks triangulated from the three cameras.
int FrontCount(const std::array<Mat34, 3>& p, const Triplet& cameras, std::span<const Track> tracks) {
  int count = 0;
  for (const Track& t : tracks) {
    const Track local = LocalTrack(t, cameras);
    if (local.view_ids.empty()) continue;
    Vec4 x;
    try {
      x = TriangulateDlt(std::span<const Mat34>(p), local);
    } catch (const Error&) {
      continue;
    }
    if (std::abs(x(3)) < 1e-12 * x.norm()) continue;
    x /= x(3);
    for (int v : local.view_ids) count += (p[v] * x)(2) > 0 ? 1 : -1;
  }
  return count;
}

TripletCameras RecoverGeneralCalibrated(const Eigen::MatrixXd& s, int id, const Triplet& cameras,
                                        std::span<const Track> tracks) {
  TripletBlocks b = BlocksOf(s);
  for (Mat3& m : b) m = NormalizeTensor(m);
  const Eigen::Vector3d k = EssentialTripletScales(b[0], b[1], b[2]);
  Eigen::MatrixXd scaled = Eigen::MatrixXd::Zero(9, 9);
  const std::array<std::pair<int, int>, 3> slots{{{0, 1}, {0, 2}, {1, 2}}};
  for (int e = 0; e < 3; ++e) {
    const auto [i, j] = slots[e];
    scaled.block<3, 3>(3 * i, 3 * j) = k(e) * b[e];
    scaled.block<3, 3>(3 * j, 3 * i) = k(e) * b[e].transpose();
  }
  const EssentialDecomposition d = DecomposeGeneralEssential(scaled);
  TripletCameras out;
  out.triplet_id = id;
  out.cameras = cameras;
  out.frame = Frame::kEuclidean;
  std::array<std::array<Mat34, 3>, 2> candidates;
  for (int k = 0; k < 3; ++k) {
    candidates[0][k] = EuclideanProjection(d.rotations[k], d.centers[k]);
    candidates[1][k] = EuclideanProjection(d.rotations[k], -d.centers[k]);
  }
  const double sign =
      FrontCount(candidates[0], cameras, tracks) >= FrontCount(candidates[1], cameras, tracks) ? 1.0 : -1.0;
  for (int k = 0; k < 3; ++k) {
    out.rotations[k] = d.rotations[k];
    out.centers[k] = sign * d.centers[k];
    out.projections[k] = EuclideanProjection(out.rotations[k], out.centers[k]);
  }
  return out;
}

TripletCameras RecoverGeneralProjective(const Eigen::MatrixXd& s, int id, const Triplet& cameras) {
  const TripletBlocks f = BlocksOf(s);
  TripletCameras out;
  out.triplet_id = id;
  out.cameras = cameras;
  out.frame = Frame::kProjective;
  const Vec3 e = Epipole(f[0], EpipoleSide::kLeft);
  out.projections[1] << Mat3::Identity(), Vec3::Zero();
  out.projections[0] << Skew(e) * f[0], e;
  const std::array<Mat34, 2> known{out.projections[0], out.projections[1]};
  const std::array<Mat3, 2> tensors{f[1], f[2]};
  out.projections[2] = ResectFromBifocals(known, tensors);
  return out;
}

// Virtual tensors for each collinear triplet, appended to the measurements.
NViewBifocal AddVirtualTensors(const NViewBifocal& measured, const TripletCover& cover,
                               std::span<const Track> tracks, const PipelineConfig& config) {
  std::vector<BlockEntry> blocks;
  for (const auto& [key, block] : measured.blocks()) blocks.push_back({key.first, key.second, block});
  for (const auto& [triplet, x] : cover.virtual_nodes) {
    const TripletBlocks real = BlocksOf(measured, triplet);
    const int idx = SelectVirtualPoint(tracks, triplet, real, config.epipole_margin);
    std::array<Mat3, 3> v;
    if (config.calibration == Calibration::kCalibrated) {
      v = VirtualBifocalsCalibrated(real, triplet, tracks[idx], tracks);
    } else {
      const TripletCameras t =
          RecoverProjectiveCollinearTriplet(real[0], real[2], real[1], triplet, tracks);
      v = VirtualBifocalsProjective(t, tracks[idx]);
    }
    for (int i = 0; i < 3; ++i) blocks.push_back({triplet[i], x, v[i]});
  }
  return NViewBifocal::Assemble(cover.CameraCount(), measured.kind(), blocks);
}

}  // namespace

TripletCover BuildCover(const NViewBifocal& m) {
  ViewingGraph g(m.n());
  for (const auto& [i, j] : m.Edges()) g.AddEdge(i, j);
  TripletCover cover = HeuristicCover(g);
  if (!IsConnected(cover)) cover = EnrichConnectivity(cover, FullCover(g));
  return cover;
}

CameraSet RealCameras(const Registration& reg, int n, Frame frame) {
  CameraSet out;
  out.frame = frame;
  out.projections.assign(n, Mat34::Zero());
  out.recovered.assign(n, false);
  for (int i = 0; i < n && i < static_cast<int>(reg.recovered.size()); ++i) {
    if (!reg.recovered[i]) continue;
    out.recovered[i] = true;
    out.projections[i] = reg.projections[i];
  }
  return out;
}

void Evaluate(const CameraSet& cameras, const Scene* truth, std::span<const Track> tracks,
              EvalReport& report) {
  const int n = static_cast<int>(cameras.projections.size());
  if (cameras.recovered.size() != cameras.projections.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one recovered flag per camera required");
  }
  if (truth && static_cast<int>(truth->cameras.size()) != n) {
    throw Error(ErrorCode::kInvalidArgument, "scene and cameras disagree on n");
  }
  report.n_cameras = n;
  report.n_reconstructed = 0;
  std::vector<Vec3> estimated, reference;
  for (int i = 0; i < n; ++i) {
    if (!cameras.recovered[i]) continue;
    ++report.n_reconstructed;
    if (cameras.frame == Frame::kEuclidean && truth) {
      estimated.push_back(CameraCenter(cameras.projections[i]).hnormalized());
      reference.push_back(truth->cameras[i].center());
    }
  }
  report.mean_position_error.reset();
  report.median_position_error.reset();
  report.mean_reprojection_error.reset();
  if (estimated.size() >= 3) {
    const PositionErrors e = PositionErrorsAfterAlignment(estimated, reference);
    report.mean_position_error = e.mean;
    report.median_position_error = e.median;
  }
  if (!tracks.empty()) {
    report.mean_reprojection_error = MeanReprojectionError(cameras.projections, cameras.recovered, tracks);
  }
}

std::vector<double> TripletScores(const NViewBifocal& measured, const TripletCover& cover) {
  std::vector<double> scores;
  for (const Triplet& t : cover.triplets) {
    const TripletBlocks b = BlocksOf(measured, t);
    scores.push_back(CollinearityScoreFromTensors(b[0], b[1], b[2]));
  }
  return scores;
}

void RequireAllCollinear(const std::vector<double>& scores, double threshold) {
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] >= threshold) {
      throw Error(ErrorCode::kPreconditionViolated, "r4 requires all cameras collinear; triplet " +
                                                        std::to_string(k) + " scores " +
                                                        std::to_string(scores[k]));
    }
  }
}

VirtualAugmentation InsertVirtualCameras(const NViewBifocal& measured, const TripletCover& cover,
                                         std::span<const Track> tracks, const PipelineConfig& config) {
  VirtualAugmentation out;
  out.cover = InsertVirtualAndPrune(cover, TripletScores(measured, cover),
                                    config.collinearity_threshold, measured.n());
  out.tensors = AddVirtualTensors(measured, out.cover, tracks, config);
  return out;
}

std::vector<TripletCameras> RecoverTriplets(const std::vector<Eigen::MatrixXd>& matrices,
                                            const TripletCover& cover, Setting setting,
                                            Calibration calibration, std::span<const Track> tracks,
                                            const RecoveryOptions& options) {
  if (matrices.size() != cover.triplets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one matrix per cover triplet required");
  }
  const bool calibrated = calibration == Calibration::kCalibrated;
  std::vector<TripletCameras> out;
  for (std::size_t k = 0; k < cover.triplets.size(); ++k) {
    const Triplet& t = cover.triplets[k];
    const Eigen::MatrixXd& s = matrices[k];
    if (s.rows() != 9 || s.cols() != 9) throw Error(ErrorCode::kInvalidArgument, "triplet matrix must be 9x9");
    TripletCameras c;
    if (setting == Setting::kCollinear) {
      c = calibrated ? RecoverCalibratedCollinearTriplet(s, t, tracks, options)
                     : RecoverProjectiveCollinearTriplet(s.block<3, 3>(0, 3), s.block<3, 3>(3, 6),
                                                         s.block<3, 3>(0, 6), t, tracks);
    } else {
      c = calibrated ? RecoverGeneralCalibrated(s, static_cast<int>(k), t, tracks)
                     : RecoverGeneralProjective(s, static_cast<int>(k), t);
    }
    c.triplet_id = static_cast<int>(k);
    out.push_back(c);
  }
  return out;
}

const char* AlgorithmName(Algorithm a) { return a == Algorithm::kR4 ? "r4" : "vc"; }

const char* CalibrationName(Calibration c) {
  return c == Calibration::kCalibrated ? "calibrated" : "uncalibrated";
}

PipelineResult RunPipeline(const Measurements& measurements, const Scene* truth,
                           const PipelineConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  PipelineResult result;
  EvalReport& report = result.report;
  report.algorithm = AlgorithmName(config.algorithm);
  report.regime = CalibrationName(config.calibration);
  const NViewBifocal& measured = measurements.tensors;
  const int n = measured.n();
  report.n_cameras = n;
  const bool calibrated = config.calibration == Calibration::kCalibrated;
  const Frame frame = calibrated ? Frame::kEuclidean : Frame::kProjective;
  result.cameras.frame = frame;
  result.cameras.projections.assign(n, Mat34::Zero());
  result.cameras.recovered.assign(n, false);
  try {
    Stage("validate", [&] {
      ValidateConfig(config.admm);
      const TensorKind want = calibrated ? TensorKind::kEssential : TensorKind::kFundamental;
      if (measured.kind() != want) {
        throw Error(ErrorCode::kInvalidArgument, "tensor kind does not match the regime");
      }
      if (truth && static_cast<int>(truth->cameras.size()) != n) {
        throw Error(ErrorCode::kInvalidArgument, "scene and measurements disagree on n");
      }
      for (const Track& t : measurements.tracks) {
        ValidateTrack(t);
        for (int v : t.view_ids) {
          if (v < 0 || v >= n) throw Error(ErrorCode::kIndexOutOfRange, "track view out of range");
        }
      }
      return 0;
    });
    TripletCover cover = Stage("cover", [&] { return BuildCover(measured); });
    NViewBifocal averaged_input = measured;
    Setting setting = Setting::kCollinear;
    if (config.algorithm == Algorithm::kR4) {
      Stage("cover", [&] {
        RequireAllCollinear(TripletScores(measured, cover), config.collinearity_threshold);
        return 0;
      });
    } else {
      setting = Setting::kGeneral;
      VirtualAugmentation aug =
          Stage("virtual", [&] { return InsertVirtualCameras(measured, cover, measurements.tracks, config); });
      cover = std::move(aug.cover);
      averaged_input = std::move(aug.tensors);
    }
    result.cover = cover;
    report.n_triplets = static_cast<int>(cover.triplets.size());
    report.n_virtual = static_cast<int>(cover.virtual_nodes.size());

    const AveragingResult avg =
        Stage("average", [&] { return Average(averaged_input, cover, setting, config.admm); });
    result.log = avg.log;
    report.iterations = avg.iterations;
    report.converged = avg.converged;

    const std::vector<TripletCameras> triplets = Stage("recover", [&] {
      return RecoverTriplets(avg.triplet_matrices, cover, setting, config.calibration,
                             measurements.tracks, config.recovery);
    });
    const Registration reg = Stage("register", [&] { return RegisterGlobal(triplets, cover, frame); });
    result.cameras = RealCameras(reg, n, frame);
    Stage("metrics", [&] {
      Evaluate(result.cameras, truth, measurements.tracks, report);
      return 0;
    });
  } catch (const StageError& e) {
    report.failure_stage = e.stage;
    report.failure_message = e.error.what();
    result.error = e.error.code();
  }
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (config.record_runtime) report.runtime_seconds = result.runtime_seconds;
  return result;
}

}  // namespace bifocal
