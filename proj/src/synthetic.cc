#include "bifocal/synthetic.h"

#include <cmath>
#include <numbers>

#include "bifocal/error.h"

namespace bifocal {

double Rng::Uniform() {
  // 53 random bits mapped to [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  do {
    u = Uniform();
  } while (u <= 0.0);
  const double v = Uniform();
  const double r = std::sqrt(-2.0 * std::log(u));
  spare_ = r * std::sin(2.0 * std::numbers::pi * v);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * v);
}

Vec3 Rng::UnitVector() {
  Vec3 v;
  do {
    v = Vec3(Normal(), Normal(), Normal());
  } while (v.norm() < 1e-9);
  return v.normalized();
}

Vec3 Rng::Gaussian3(double sigma) {
  const double x = Normal(), y = Normal(), z = Normal();
  return sigma * Vec3(x, y, z);
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Mat3 RandomIntrinsics(Rng& rng, IntrinsicsMode mode) {
  if (mode == IntrinsicsMode::kCalibrated) return Mat3::Identity();
  const double f = rng.Uniform(0.8, 1.2);
  const double px = rng.Uniform(-0.1, 0.1);
  const double py = rng.Uniform(-0.1, 0.1);
  Mat3 k;
  k << f, 0, px, 0, f, py, 0, 0, 1;
  return k;
}

// Rotation whose optical axis (third column) is `forward`.
Mat3 LookRotation(const Vec3& forward, const Vec3& hint) {
  const Vec3 z = forward.normalized();
  Vec3 x = hint - hint.dot(z) * z;
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

}  // namespace

Scene GenerateScene(const SceneSpec& spec) {
  if (spec.n_cams < 3) {
    throw Error(ErrorCode::kTooFewCameras, "scene needs at least 3 cameras");
  }
  if (spec.n_points < 4) {
    throw Error(ErrorCode::kInvalidArgument, "scene needs at least 4 points");
  }
  Rng rng(spec.seed);
  Scene scene;
  scene.layout = spec.layout;
  scene.seed = spec.seed;
  scene.intrinsics = spec.intrinsics;

  int n_line = 0;
  switch (spec.layout) {
    case Layout::kCollinear: n_line = spec.n_cams; break;
    case Layout::kGeneral: n_line = 0; break;
    case Layout::kMixed:
      n_line = static_cast<int>(std::lround(spec.collinear_fraction * spec.n_cams));
      break;
  }
  scene.collinear_fraction = static_cast<double>(n_line) / spec.n_cams;

  // Camera line: offset 8 units from the point cloud, cameras facing it.
  const Vec3 view = rng.UnitVector();
  Vec3 line_dir = rng.UnitVector();
  line_dir = (line_dir - line_dir.dot(view) * view).normalized();
  const Mat3 base = LookRotation(view, line_dir);
  std::vector<double> offsets(n_line);
  double pos = 0.0;
  for (int i = 0; i < n_line; ++i) {
    offsets[i] = pos;
    pos += rng.Uniform(0.5, 1.5);
  }
  const double mid = n_line > 0 ? 0.5 * offsets.back() : 0.0;
  for (int i = 0; i < n_line; ++i) {
    const Vec3 center = -8.0 * view + (offsets[i] - mid) * line_dir;
    const Mat3 roll = RotationFromAxisAngle(view * rng.Uniform(-10.0, 10.0) * kDeg);
    const Mat3 tilt = RotationFromAxisAngle(rng.UnitVector() * rng.Uniform(0.0, 3.0) * kDeg);
    const Mat3 k = RandomIntrinsics(rng, spec.intrinsics);
    scene.cameras.emplace_back(k, tilt * roll * base, center);
    scene.collinear_ids.push_back(i);
  }
  for (int i = n_line; i < spec.n_cams; ++i) {
    const Vec3 dir = rng.UnitVector();
    const Vec3 center = rng.Uniform(8.0, 10.0) * dir;
    const Vec3 target = Vec3(rng.Uniform(-0.5, 0.5), rng.Uniform(-0.5, 0.5),
                             rng.Uniform(-0.5, 0.5));
    const Mat3 r = LookRotation(target - center, rng.UnitVector());
    const Mat3 k = RandomIntrinsics(rng, spec.intrinsics);
    scene.cameras.emplace_back(k, r, center);
  }
  scene.points.reserve(spec.n_points);
  for (int p = 0; p < spec.n_points; ++p) {
    scene.points.emplace_back(rng.Uniform(-2, 2), rng.Uniform(-2, 2), rng.Uniform(-2, 2));
  }
  return scene;
}

Eigen::MatrixXd ConsistentDense(const std::vector<Camera>& cameras) {
  const int n = static_cast<int>(cameras.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d.block<3, 3>(3 * i, 3 * j) =
          cameras[i].orientation_factor() *
          Skew(cameras[i].center() - cameras[j].center()) *
          cameras[j].orientation_factor().transpose();
    }
  }
  return d;
}

NViewBifocal ExactNView(const std::vector<Camera>& cameras, TensorKind kind) {
  const int n = static_cast<int>(cameras.size());
  std::vector<BlockEntry> blocks;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Mat3 m;
      if (kind == TensorKind::kEssential) {
        const Camera ci = Camera::Calibrated(cameras[i].rotation(), cameras[i].center());
        const Camera cj = Camera::Calibrated(cameras[j].rotation(), cameras[j].center());
        m = BifocalFromPair(ci, cj).matrix();
      } else {
        m = BifocalFromPair(cameras[i], cameras[j]).matrix();
      }
      blocks.push_back({i, j, m});
    }
  }
  return NViewBifocal::Assemble(n, kind, blocks);
}

Measurements Measure(const Scene& scene, TensorKind kind, const NoiseSpec& noise) {
  Rng rng(noise.seed);
  const int n = static_cast<int>(scene.cameras.size());
  const double rot_sigma = noise.rotation_deg * kDeg * std::sqrt(std::numbers::pi / 8.0);
  const double dir_sigma =
      noise.translation_dir_deg * kDeg / std::sqrt(std::numbers::pi / 2.0);

  std::vector<BlockEntry> blocks;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (noise.max_gap > 0 && j - i > noise.max_gap) continue;
      const Camera& ci = scene.cameras[i];
      const Camera& cj = scene.cameras[j];
      Mat3 rel = ci.rotation().transpose() * cj.rotation();
      Vec3 trans = ci.rotation().transpose() * (ci.center() - cj.center());
      if (rot_sigma > 0.0) rel = RotationFromAxisAngle(rng.Gaussian3(rot_sigma)) * rel;
      if (dir_sigma > 0.0) {
        Vec3 w = rng.Gaussian3(dir_sigma);
        const Vec3 u = trans.normalized();
        w -= w.dot(u) * u;
        trans = RotationFromAxisAngle(w) * trans;
      }
      Mat3 m = Skew(trans) * rel;
      if (kind == TensorKind::kFundamental) {
        m = ci.intrinsics().inverse().transpose() * m * cj.intrinsics().inverse();
      }
      m = NormalizeTensor(m);
      if (noise.matrix_sigma > 0.0) {
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) m(r, c) += noise.matrix_sigma * rng.Normal();
        }
      }
      blocks.push_back({i, j, m});
    }
  }
  AssembleOptions options;
  options.validate_rank = noise.matrix_sigma == 0.0;
  Measurements out;
  out.tensors = NViewBifocal::Assemble(n, kind, blocks, options);

  for (const Vec3& x : scene.points) {
    Track track;
    for (int i = 0; i < n; ++i) {
      const Camera& c = scene.cameras[i];
      if (c.Depth(x) <= 0.0) continue;
      Vec3 pixel = c.Project(x);
      if (noise.pixel > 0.0) {
        pixel.x() += noise.pixel * rng.Normal();
        pixel.y() += noise.pixel * rng.Normal();
      }
      if (kind == TensorKind::kEssential) {
        pixel = c.intrinsics().inverse() * pixel;
        pixel /= pixel.z();
      }
      track.view_ids.push_back(i);
      track.points.push_back(pixel);
    }
    if (track.view_ids.size() >= 2) out.tracks.push_back(std::move(track));
  }
  return out;
}

}  // namespace bifocal
