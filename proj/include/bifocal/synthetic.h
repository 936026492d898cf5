#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "bifocal/geometry.h"
#include "bifocal/nview.h"

namespace bifocal {

// Seedable generator with a platform-independent stream: mt19937_64 is fully
// specified by the standard, and the distributions below are implemented here
// rather than taken from <random>, whose algorithms vary across libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform();  // [0, 1)
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();
  Vec3 UnitVector();
  Vec3 Gaussian3(double sigma);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Layout { kCollinear, kGeneral, kMixed };
enum class IntrinsicsMode { kCalibrated, kVaried };

struct SceneSpec {
  Layout layout = Layout::kCollinear;
  double collinear_fraction = 0.5;  // mixed layout only
  int n_cams = 10;
  int n_points = 50;
  std::uint64_t seed = 0;
  IntrinsicsMode intrinsics = IntrinsicsMode::kCalibrated;
};

struct Scene {
  std::vector<Camera> cameras;
  std::vector<Vec3> points;
  Layout layout = Layout::kCollinear;
  double collinear_fraction = 0.0;
  std::uint64_t seed = 0;
  IntrinsicsMode intrinsics = IntrinsicsMode::kCalibrated;
  // Cameras placed on the common line (all of them for the collinear layout).
  std::vector<int> collinear_ids;
};

Scene GenerateScene(const SceneSpec& spec);

struct NoiseSpec {
  double rotation_deg = 0.0;
  double translation_dir_deg = 0.0;
  double pixel = 0.0;
  // Gaussian noise added entrywise to the normalized tensors; breaks rank 2.
  double matrix_sigma = 0.0;
  std::uint64_t seed = 0;
  // Only pairs with |i - j| <= max_gap are measured; 0 measures all pairs.
  int max_gap = 0;
};

struct Measurements {
  NViewBifocal tensors;
  // One track per scene point over every camera seeing it.  Calibrated
  // (essential) measurements carry normalized coordinates K^{-1} x.
  std::vector<Track> tracks;
};

Measurements Measure(const Scene& scene, TensorKind kind, const NoiseSpec& noise);

// Exact n-view matrix of the scene: unit-normalized blocks over every pair.
NViewBifocal ExactNView(const std::vector<Camera>& cameras, TensorKind kind);

// Unnormalized consistent matrix V_i [t_i - t_j]x V_j^T over every pair.
Eigen::MatrixXd ConsistentDense(const std::vector<Camera>& cameras);

}  // namespace bifocal
