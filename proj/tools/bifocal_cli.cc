// Command-line driver: synthesize scenes and measurements, average, recover,
// evaluate, or run the whole pipeline.  Exit codes: 0 success, 2 validation
// error, 3 no convergence.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bifocal/pipeline.h"

namespace {

using namespace bifocal;
using nlohmann::json;

constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

struct Options {
  bool json_output = false;
  std::string out;
  std::string scene;
  std::string measurements;
  std::string cameras;
  std::string cover;
  std::string algorithm = "r4";
  std::string regime = "calibrated";
  std::string layout = "collinear";
  std::string intrinsics;
  int n_cams = 10;
  int n_points = 50;
  double collinear_fraction = 0.5;
  std::uint64_t seed = 0;
  double noise_rot_deg = 0.0;
  double noise_trans_deg = 0.0;
  double noise_px = 0.0;
  double noise_matrix = 0.0;
  int max_gap = 0;
  double tol = 1e-9;
  int max_iters = 500;
  double collinearity_threshold = 0.05;
  int threads = 1;
  bool record_runtime = false;
};

// Diagnostics go to stderr as text, or to stdout as one JSON object.
class Reporter {
 public:
  explicit Reporter(const Options& o) : json_(o.json_output) {}

  void Output(const std::string& path) { outputs_.push_back(path); }
  void Set(const std::string& key, json value) { extra_[key] = std::move(value); }
  void Message(const std::string& m) { message_ = m; }

  int Finish(int code, std::string message = "") {
    if (message.empty()) message = message_;
    if (json_) {
      json j = {{"status", code == 0 ? "ok" : "error"}, {"exit_code", code}, {"outputs", outputs_}};
      if (!message.empty()) j["message"] = message;
      for (const auto& [k, v] : extra_) j[k] = v;
      std::cout << j.dump() << "\n";
    } else {
      for (const auto& [k, v] : extra_) std::cerr << k << ": " << v.dump() << "\n";
      for (const std::string& p : outputs_) std::cerr << "wrote " << p << "\n";
      if (!message.empty()) std::cerr << "error: " << message << "\n";
    }
    return code;
  }

 private:
  bool json_;
  std::vector<std::string> outputs_;
  std::map<std::string, json> extra_;
  std::string message_;
};

Calibration ParseRegime(const std::string& s) {
  return s == "calibrated" ? Calibration::kCalibrated : Calibration::kUncalibrated;
}

Algorithm ParseAlgorithm(const std::string& s) { return s == "r4" ? Algorithm::kR4 : Algorithm::kVC; }

PipelineConfig MakeConfig(const Options& o) {
  PipelineConfig c;
  c.algorithm = ParseAlgorithm(o.algorithm);
  c.calibration = ParseRegime(o.regime);
  c.admm.primal_tol = o.tol;
  c.admm.dual_tol = o.tol;
  c.admm.max_iters = o.max_iters;
  c.admm.threads = o.threads;
  c.collinearity_threshold = o.collinearity_threshold;
  c.record_runtime = o.record_runtime;
  return c;
}

Scene Synthesize(const Options& o) {
  SceneSpec spec;
  spec.layout = o.layout == "general" ? Layout::kGeneral
                : o.layout == "mixed" ? Layout::kMixed
                                      : Layout::kCollinear;
  spec.n_cams = o.n_cams;
  spec.n_points = o.n_points;
  spec.seed = o.seed;
  spec.collinear_fraction = o.collinear_fraction;
  const std::string intrinsics =
      o.intrinsics.empty() ? (o.regime == "calibrated" ? "calibrated" : "varied") : o.intrinsics;
  spec.intrinsics = intrinsics == "varied" ? IntrinsicsMode::kVaried : IntrinsicsMode::kCalibrated;
  if (spec.n_cams < 3 || spec.n_points < 4) {
    throw Error(ErrorCode::kInvalidArgument, "need at least 3 cameras and 4 points");
  }
  return GenerateScene(spec);
}

Measurements MeasureScene(const Scene& scene, const Options& o) {
  NoiseSpec noise;
  noise.rotation_deg = o.noise_rot_deg;
  noise.translation_dir_deg = o.noise_trans_deg;
  noise.pixel = o.noise_px;
  noise.matrix_sigma = o.noise_matrix;
  noise.max_gap = o.max_gap;
  noise.seed = o.seed;
  return Measure(scene,
                 ParseRegime(o.regime) == Calibration::kCalibrated ? TensorKind::kEssential
                                                                    : TensorKind::kFundamental,
                 noise);
}

std::string Sidecar(const std::string& path) {
  return std::filesystem::path(path).replace_extension(".log").string();
}

std::string LogText(const std::vector<IterationRecord>& log, double runtime) {
  std::ostringstream out;
  for (const IterationRecord& r : log) out << FormatRecord(r) << "\n";
  out << json({{"runtime_seconds", runtime}}).dump() << "\n";
  return out.str();
}

int RunSynth(const Options& o, Reporter& rep) {
  const Scene scene = Synthesize(o);
  WriteTextFile(o.out, SceneToJson(scene));
  rep.Output(o.out);
  return 0;
}

int RunMeasure(const Options& o, Reporter& rep) {
  const Scene scene = SceneFromJson(ReadTextFile(o.scene));
  WriteTextFile(o.out, MeasurementsToJson(MeasureScene(scene, o)));
  rep.Output(o.out);
  return 0;
}

int RunAverage(const Options& o, Reporter& rep) {
  const auto start = std::chrono::steady_clock::now();
  const Measurements m = MeasurementsFromJson(ReadTextFile(o.measurements));
  const PipelineConfig config = MakeConfig(o);
  TripletCover cover = BuildCover(m.tensors);
  NViewBifocal input = m.tensors;
  Setting setting = Setting::kCollinear;
  if (config.algorithm == Algorithm::kR4) {
    RequireAllCollinear(TripletScores(m.tensors, cover), config.collinearity_threshold);
  } else {
    VirtualAugmentation aug = InsertVirtualCameras(m.tensors, cover, m.tracks, config);
    cover = std::move(aug.cover);
    input = std::move(aug.tensors);
    setting = Setting::kGeneral;
  }
  const AveragingResult avg = Average(input, cover, setting, config.admm);
  Measurements out;
  out.tensors = avg.averaged;
  out.tracks = m.tracks;
  WriteTextFile(o.out, MeasurementsToJson(out));
  const std::string cover_path = o.cover.empty() ? o.out + ".cover.json" : o.cover;
  WriteTextFile(cover_path, CoverToJson(cover));
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  WriteTextFile(Sidecar(o.out), LogText(avg.log, runtime));
  rep.Output(o.out);
  rep.Output(cover_path);
  rep.Output(Sidecar(o.out));
  rep.Set("iterations", avg.iterations);
  rep.Set("converged", avg.converged);
  if (avg.converged) return 0;
  rep.Message("averaging did not converge");
  return kExitNoConvergence;
}

int RunRecover(const Options& o, Reporter& rep) {
  const Measurements m = MeasurementsFromJson(ReadTextFile(o.measurements));
  const TripletCover cover =
      o.cover.empty() ? BuildCover(m.tensors) : CoverFromJson(ReadTextFile(o.cover));
  const PipelineConfig config = MakeConfig(o);
  std::vector<Eigen::MatrixXd> matrices;
  for (const Triplet& t : cover.triplets) matrices.push_back(m.tensors.Submatrix({t[0], t[1], t[2]}));
  const Setting setting = config.algorithm == Algorithm::kR4 ? Setting::kCollinear : Setting::kGeneral;
  const std::vector<TripletCameras> triplets =
      RecoverTriplets(matrices, cover, setting, config.calibration, m.tracks, config.recovery);
  const Frame frame = config.calibration == Calibration::kCalibrated ? Frame::kEuclidean : Frame::kProjective;
  const Registration reg = RegisterGlobal(triplets, cover, frame);
  // Virtual cameras carry ids past the last tracked view.
  int n = m.tensors.n() - static_cast<int>(cover.virtual_nodes.size());
  WriteTextFile(o.out, CamerasToJson(RealCameras(reg, n, frame)));
  rep.Output(o.out);
  return 0;
}

int RunEval(const Options& o, Reporter& rep) {
  const CameraSet cameras = CamerasFromJson(ReadTextFile(o.cameras));
  Scene scene;
  if (!o.scene.empty()) scene = SceneFromJson(ReadTextFile(o.scene));
  Measurements m;
  if (!o.measurements.empty()) m = MeasurementsFromJson(ReadTextFile(o.measurements));
  EvalReport report;
  report.algorithm = o.algorithm;
  report.regime = o.regime;
  Evaluate(cameras, o.scene.empty() ? nullptr : &scene, m.tracks, report);
  WriteTextFile(o.out, ReportToJson(report));
  rep.Output(o.out);
  return 0;
}

int RunPipelineCommand(const Options& o, Reporter& rep) {
  Scene scene;
  bool have_scene = false;
  if (!o.scene.empty()) {
    scene = SceneFromJson(ReadTextFile(o.scene));
    have_scene = true;
  }
  Measurements m;
  if (!o.measurements.empty()) {
    m = MeasurementsFromJson(ReadTextFile(o.measurements));
  } else {
    if (!have_scene) {
      scene = Synthesize(o);
      have_scene = true;
    }
    m = MeasureScene(scene, o);
  }
  const PipelineResult r = RunPipeline(m, have_scene ? &scene : nullptr, MakeConfig(o));
  std::filesystem::create_directories(o.out);
  const std::filesystem::path dir(o.out);
  const std::string report_path = (dir / "report.json").string();
  const std::string cameras_path = (dir / "cameras_out.json").string();
  const std::string cover_path = (dir / "cover.json").string();
  WriteTextFile(report_path, ReportToJson(r.report));
  WriteTextFile(cameras_path, CamerasToJson(r.cameras));
  WriteTextFile(cover_path, CoverToJson(r.cover));
  WriteTextFile(Sidecar(report_path), LogText(r.log, r.runtime_seconds));
  for (const std::string& p : {report_path, cameras_path, cover_path, Sidecar(report_path)}) rep.Output(p);
  rep.Set("n_reconstructed", r.report.n_reconstructed);
  if (r.report.mean_position_error) rep.Set("mean_position_error", *r.report.mean_position_error);
  if (r.error) {
    rep.Set("failure_stage", r.report.failure_stage);
    rep.Message(r.report.failure_message);
  }
  // A stage failing after an unconverged averaging run is reported as the
  // convergence failure it most likely is.
  const bool averaged = r.report.iterations > 0;
  if (averaged && !r.report.converged) {
    rep.Message(r.error ? "averaging did not converge; then " + r.report.failure_message
                        : "averaging did not converge");
    return kExitNoConvergence;
  }
  if (!r.error) return 0;
  return *r.error == ErrorCode::kNoConvergence ? kExitNoConvergence : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bifocal tensor averaging for collinear camera setups"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("--json", o.json_output, "Machine-readable diagnostics on stdout");

  const auto add_synth = [&](CLI::App* c) {
    c->add_option("--layout", o.layout)->check(CLI::IsMember({"collinear", "general", "mixed"}));
    c->add_option("--n-cams", o.n_cams);
    c->add_option("--n-points", o.n_points);
    c->add_option("--collinear-fraction", o.collinear_fraction);
    c->add_option("--intrinsics", o.intrinsics)->check(CLI::IsMember({"calibrated", "varied"}));
  };
  const auto add_noise = [&](CLI::App* c) {
    c->add_option("--noise-rot-deg", o.noise_rot_deg);
    c->add_option("--noise-trans-deg", o.noise_trans_deg);
    c->add_option("--noise-px", o.noise_px);
    c->add_option("--noise-matrix", o.noise_matrix);
    c->add_option("--max-gap", o.max_gap, "Measure only pairs with |i-j| <= max-gap (0: all)");
  };
  const auto add_regime = [&](CLI::App* c) {
    c->add_option("--regime", o.regime)->check(CLI::IsMember({"calibrated", "uncalibrated"}));
  };
  const auto add_algorithm = [&](CLI::App* c) {
    c->add_option("--algorithm", o.algorithm)->check(CLI::IsMember({"r4", "vc"}));
  };
  const auto add_admm = [&](CLI::App* c) {
    c->add_option("--tol", o.tol);
    c->add_option("--max-iters", o.max_iters);
    c->add_option("--collinearity-threshold", o.collinearity_threshold);
    c->add_option("--threads", o.threads, "Worker cap; results do not depend on it");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a scene");
  add_synth(synth);
  add_regime(synth);
  synth->add_option("--seed", o.seed);
  synth->add_option("--out", o.out)->required();

  CLI::App* measure = app.add_subcommand("measure", "Measure tensors and tracks of a scene");
  measure->add_option("--scene", o.scene)->required();
  add_regime(measure);
  add_noise(measure);
  measure->add_option("--seed", o.seed);
  measure->add_option("--out", o.out)->required();

  CLI::App* average = app.add_subcommand("average", "Average measured tensors");
  average->add_option("--measurements", o.measurements)->required();
  add_algorithm(average);
  add_regime(average);
  add_admm(average);
  average->add_option("--cover-out", o.cover, "Cover path (default: <out>.cover.json)");
  average->add_option("--out", o.out)->required();

  CLI::App* recover = app.add_subcommand("recover", "Recover and register cameras from averaged tensors");
  recover->add_option("--measurements", o.measurements)->required();
  recover->add_option("--cover", o.cover);
  add_algorithm(recover);
  add_regime(recover);
  recover->add_option("--out", o.out)->required();

  CLI::App* eval = app.add_subcommand("eval", "Evaluate cameras against a scene");
  eval->add_option("--cameras", o.cameras)->required();
  eval->add_option("--scene", o.scene);
  eval->add_option("--measurements", o.measurements, "Tracks for the reprojection error");
  add_algorithm(eval);
  add_regime(eval);
  eval->add_option("--out", o.out)->required();

  CLI::App* pipeline = app.add_subcommand("pipeline", "Run the full pipeline");
  pipeline->add_option("--measurements", o.measurements, "Measured input (default: synthesize)");
  pipeline->add_option("--scene", o.scene, "Reference scene");
  add_algorithm(pipeline);
  add_regime(pipeline);
  add_admm(pipeline);
  add_synth(pipeline);
  add_noise(pipeline);
  pipeline->add_option("--seed", o.seed);
  pipeline->add_flag("--record-runtime", o.record_runtime, "Include runtime_seconds in report.json");
  pipeline->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  Reporter rep(o);
  try {
    int code = 0;
    if (*synth) code = RunSynth(o, rep);
    else if (*measure) code = RunMeasure(o, rep);
    else if (*average) code = RunAverage(o, rep);
    else if (*recover) code = RunRecover(o, rep);
    else if (*eval) code = RunEval(o, rep);
    else if (*pipeline) code = RunPipelineCommand(o, rep);
    return rep.Finish(code);
  } catch (const Error& e) {
    return rep.Finish(e.code() == ErrorCode::kNoConvergence ? kExitNoConvergence : kExitValidation,
                      e.what());
  } catch (const std::exception& e) {
    return rep.Finish(kExitValidation, e.what());
  }
}
