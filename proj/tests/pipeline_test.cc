#include <gtest/gtest.h>

#include "bifocal/pipeline.h"

namespace bifocal {
namespace {

struct Case {
  Scene scene;
  Measurements measurements;
};

Case Make(Layout layout, int n, Calibration cal, int max_gap, std::uint64_t seed, double rot = 0.0) {
  SceneSpec spec;
  spec.layout = layout;
  spec.n_cams = n;
  spec.seed = seed;
  spec.intrinsics = cal == Calibration::kCalibrated ? IntrinsicsMode::kCalibrated : IntrinsicsMode::kVaried;
  Case c;
  c.scene = GenerateScene(spec);
  NoiseSpec noise;
  noise.max_gap = max_gap;
  noise.rotation_deg = rot;
  noise.seed = seed;
  c.measurements = Measure(
      c.scene, cal == Calibration::kCalibrated ? TensorKind::kEssential : TensorKind::kFundamental, noise);
  return c;
}

PipelineResult RunCase(const Case& c, Algorithm alg, Calibration cal) {
  PipelineConfig config;
  config.algorithm = alg;
  config.calibration = cal;
  return RunPipeline(c.measurements, &c.scene, config);
}

TEST(Pipeline, R4CalibratedCollinearOracle) {
  const Case c = Make(Layout::kCollinear, 20, Calibration::kCalibrated, 2, 1);
  const PipelineResult r = RunCase(c, Algorithm::kR4, Calibration::kCalibrated);
  ASSERT_FALSE(r.error) << r.report.failure_message;
  EXPECT_TRUE(r.report.converged);
  EXPECT_EQ(r.report.n_reconstructed, 20);
  EXPECT_LT(*r.report.mean_position_error, 1e-7);
  EXPECT_LT(*r.report.mean_reprojection_error, 1e-8);
  EXPECT_EQ(r.report.n_virtual, 0);
  EXPECT_EQ(r.cameras.frame, Frame::kEuclidean);
}

TEST(Pipeline, R4UncalibratedCollinearOracle) {
  const Case c = Make(Layout::kCollinear, 10, Calibration::kUncalibrated, 2, 2);
  const PipelineResult r = RunCase(c, Algorithm::kR4, Calibration::kUncalibrated);
  ASSERT_FALSE(r.error) << r.report.failure_message;
  EXPECT_EQ(r.report.n_reconstructed, 10);
  EXPECT_FALSE(r.report.mean_position_error.has_value());
  EXPECT_LT(*r.report.mean_reprojection_error, 1e-8);
  EXPECT_EQ(r.cameras.frame, Frame::kProjective);
}

TEST(Pipeline, R4RejectsMixedScene) {
  const Case c = Make(Layout::kMixed, 12, Calibration::kCalibrated, 0, 1);
  const PipelineResult r = RunCase(c, Algorithm::kR4, Calibration::kCalibrated);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(*r.error, ErrorCode::kPreconditionViolated);
  EXPECT_EQ(r.report.failure_stage, "cover");
  EXPECT_EQ(r.report.n_reconstructed, 0);
}

TEST(Pipeline, VcMixedSceneRecoversAllCameras) {
  for (Calibration cal : {Calibration::kCalibrated, Calibration::kUncalibrated}) {
    const Case c = Make(Layout::kMixed, 12, cal, 0, 3);
    const PipelineResult r = RunCase(c, Algorithm::kVC, cal);
    ASSERT_FALSE(r.error) << r.report.failure_message;
    EXPECT_GT(r.report.n_virtual, 0);
    EXPECT_EQ(r.report.n_reconstructed, 12);
    EXPECT_LT(*r.report.mean_reprojection_error, 1e-8);
    if (cal == Calibration::kCalibrated) EXPECT_LT(*r.report.mean_position_error, 1e-6);
    // Virtual cameras live in the cover but not in the output.
    EXPECT_GT(r.cover.CameraCount(), 12);
    EXPECT_EQ(r.cameras.projections.size(), 12u);
  }
}

TEST(Pipeline, VcOnFullyCollinearScene) {
  const Case c = Make(Layout::kCollinear, 10, Calibration::kCalibrated, 2, 4);
  const PipelineResult r = RunCase(c, Algorithm::kVC, Calibration::kCalibrated);
  ASSERT_FALSE(r.error) << r.report.failure_message;
  EXPECT_EQ(r.report.n_reconstructed, 10);
  EXPECT_LT(*r.report.mean_position_error, 1e-6);
}

TEST(Pipeline, NoisyR4StaysClose) {
  const Case c = Make(Layout::kCollinear, 12, Calibration::kCalibrated, 2, 5, 0.5);
  const PipelineResult r = RunCase(c, Algorithm::kR4, Calibration::kCalibrated);
  ASSERT_FALSE(r.error) << r.report.failure_message;
  EXPECT_TRUE(r.report.converged);
  EXPECT_LT(*r.report.mean_position_error, 0.1);
  EXPECT_EQ(r.log.size(), static_cast<std::size_t>(r.report.iterations));
}

TEST(Pipeline, ValidationFailures) {
  const Case c = Make(Layout::kCollinear, 6, Calibration::kCalibrated, 2, 6);
  PipelineResult r = RunCase(c, Algorithm::kR4, Calibration::kUncalibrated);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.report.failure_stage, "validate");
  PipelineConfig config;
  config.admm.rho = -1.0;
  r = RunPipeline(c.measurements, &c.scene, config);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.report.failure_stage, "validate");
}

TEST(Pipeline, ReportIsDeterministicAcrossRunsAndThreads) {
  const Case c = Make(Layout::kMixed, 12, Calibration::kCalibrated, 0, 7, 0.2);
  PipelineConfig config;
  config.algorithm = Algorithm::kVC;
  config.admm.max_iters = 60;
  const std::string a = ReportToJson(RunPipeline(c.measurements, &c.scene, config).report);
  const std::string b = ReportToJson(RunPipeline(c.measurements, &c.scene, config).report);
  config.admm.threads = 4;
  const std::string d = ReportToJson(RunPipeline(c.measurements, &c.scene, config).report);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
  config.record_runtime = true;
  EXPECT_TRUE(RunPipeline(c.measurements, &c.scene, config).report.runtime_seconds.has_value());
}

}  // namespace
}  // namespace bifocal
