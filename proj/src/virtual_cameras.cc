#include "bifocal/virtual_cameras.h"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "bifocal/averaging.h"
#include "bifocal/error.h"

namespace bifocal {
namespace {

// Block (a, b) of a triplet for any a != b.
Mat3 Oriented(const TripletBlocks& t, int a, int b) {
  if (a > b) return Oriented(t, b, a).transpose();
  return t[a == 0 ? (b == 1 ? 0 : 1) : 2];
}

double DistanceToEpipole(const Vec3& x, const Vec3& e) {
  if (std::abs(e(2)) < 1e-12 * e.norm()) return std::numeric_limits<double>::infinity();
  return (x.hnormalized() - e.hnormalized()).norm();
}

Mat3 CheckedVirtual(const Mat3& m) {
  const Vec3 s = Eigen::JacobiSVD<Mat3>(m).singularValues();
  if (!(s(1) > 1e-6 * s(0))) {
    throw Error(ErrorCode::kDegenerateEpipole, "virtual tensor is close to rank 1");
  }
  return NormalizeTensor(m);
}

Track PointTrack(const Track& point, const Triplet& cameras) {
  for (int c : cameras) {
    if (!point.Observes(c)) throw Error(ErrorCode::kInvalidArgument, "track misses a view");
  }
  return point.Subtrack(cameras);
}

}  // namespace

int SelectVirtualPoint(std::span<const Track> tracks, const Triplet& cameras,
                       const TripletBlocks& tensors, double epipole_margin) {
  // Epipoles of the two other cameras in each view.
  std::array<std::array<Vec3, 2>, 3> epipoles;
  for (int a = 0; a < 3; ++a) {
    int k = 0;
    for (int b = 0; b < 3; ++b) {
      if (b != a) epipoles[a][k++] = Epipole(Oriented(tensors, a, b), EpipoleSide::kLeft);
    }
  }
  int best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < static_cast<int>(tracks.size()); ++idx) {
    const Track& t = tracks[idx];
    if (!std::all_of(cameras.begin(), cameras.end(), [&](int c) { return t.Observes(c); })) {
      continue;
    }
    const Track local = t.Subtrack(cameras);
    bool clear = true;
    for (int a = 0; a < 3 && clear; ++a) {
      for (const Vec3& e : epipoles[a]) clear = clear && DistanceToEpipole(local.points[a], e) >= epipole_margin;
    }
    if (!clear) continue;
    double score = 0.0;
    try {
      for (auto [a, b] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
        score += SymmetricEpipolarDistance(BifocalTensor(Oriented(tensors, a, b), TensorKind::kFundamental),
                                           local.points[a], local.points[b]);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateLine) throw;
      continue;
    }
    if (score < best_score) {
      best_score = score;
      best = idx;
    }
  }
  if (best < 0) throw Error(ErrorCode::kNoValidPoint, "no track clear of the epipoles");
  return best;
}

std::array<Mat3, 3> VirtualBifocalsCalibrated(const TripletBlocks& essentials,
                                              const Triplet& cameras, const Track& point,
                                              std::span<const Track> tracks, int source) {
  if (source < 0 || source > 2) throw Error(ErrorCode::kInvalidArgument, "source outside triplet");
  const Track local = PointTrack(point, cameras);
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    Mat3 r = Mat3::Identity();
    if (i != source) {
      const std::array<int, 2> views{cameras[i], cameras[source]};
      std::vector<Track> pair;
      for (const Track& t : tracks) {
        if (t.Observes(views[0]) && t.Observes(views[1])) pair.push_back(t.Subtrack(views));
      }
      try {
        r = RotationFromEssential(BifocalTensor(Oriented(essentials, i, source), TensorKind::kEssential),
                                  pair).rotation;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAmbiguousCheirality) throw;
        throw Error(ErrorCode::kRotationAmbiguity, "relative rotation not determined");
      }
    }
    out[i] = CheckedVirtual(Skew(local.points[i]) * r);
  }
  return out;
}

std::array<Mat3, 3> VirtualBifocalsProjective(const TripletCameras& recovered, const Track& point,
                                              int source) {
  if (source < 0 || source > 2) throw Error(ErrorCode::kInvalidArgument, "source outside triplet");
  for (const Mat34& p : recovered.projections) {
    if (p.isZero(0.0)) throw Error(ErrorCode::kMissingRecovery, "triplet cameras not recovered");
  }
  const Track local = PointTrack(point, recovered.cameras);
  const Mat3 a_source = recovered.projections[source].leftCols<3>();
  Eigen::FullPivLU<Mat3> lu(a_source);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kInvalidArgument, "source camera must be finite in the frame");
  }
  const Mat3 inv = lu.inverse();
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i) {
    out[i] = CheckedVirtual(Skew(local.points[i]) * recovered.projections[i].leftCols<3>() * inv);
  }
  return out;
}

Mat34 ResectFromBifocals(std::span<const Mat34> known, std::span<const Mat3> tensors) {
  if (known.size() != tensors.size() || known.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need two known cameras");
  }
  // Unknown p = P_n row-major; S = G P_n with G = P_k^T F_kn, S + S^T = 0.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(10 * known.size(), 12);
  int row = 0;
  for (std::size_t k = 0; k < known.size(); ++k) {
    const Eigen::Matrix<double, 4, 3> g = known[k].transpose() * tensors[k];
    for (int i = 0; i < 4; ++i) {
      for (int j = i; j < 4; ++j, ++row) {
        // S_ij = sum_r g(i, r) P(r, j); S_ji = sum_r g(j, r) P(r, i).
        for (int r = 0; r < 3; ++r) {
          a(row, 4 * r + j) += g(i, r);
          a(row, 4 * r + i) += g(j, r);
        }
      }
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv(10) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::kDegenerateGeometry, "camera not determined by the tensors");
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Mat34 out;
  for (int r = 0; r < 3; ++r) out.row(r) = p.segment<4>(4 * r).transpose();
  return out;
}

NViewBifocal FourViewMatrix(const TripletBlocks& real, const std::array<Mat3, 3>& virtual_blocks,
                            TensorKind kind) {
  // Unit blocks in slot order over (0, 1, 2, X = 3).
  std::array<Mat3, 4 * 4> unit;
  const auto at = [&](int a, int b) -> Mat3& { return unit[4 * a + b]; };
  at(0, 1) = NormalizeTensor(real[0]);
  at(0, 2) = NormalizeTensor(real[1]);
  at(1, 2) = NormalizeTensor(real[2]);
  for (int i = 0; i < 3; ++i) at(i, 3) = NormalizeTensor(virtual_blocks[i]);
  std::array<double, 16> scale{};
  if (kind == TensorKind::kEssential) {
    // The real triplet is collinear, so chain the three triangles through X.
    const Eigen::Vector3d s01x = EssentialTripletScales(at(0, 1), at(0, 3), at(1, 3));
    const Eigen::Vector3d s02x = EssentialTripletScales(at(0, 2), at(0, 3), at(2, 3));
    const Eigen::Vector3d s12x = EssentialTripletScales(at(1, 2), at(1, 3), at(2, 3));
    scale[4 * 0 + 3] = 1.0;
    scale[4 * 0 + 1] = s01x(0) / s01x(1);
    scale[4 * 1 + 3] = s01x(2) / s01x(1);
    scale[4 * 0 + 2] = s02x(0) / s02x(1);
    scale[4 * 2 + 3] = s02x(2) / s02x(1);
    const double f = (s12x(1) * scale[4 * 1 + 3] + s12x(2) * scale[4 * 2 + 3]) /
                     (s12x(1) * s12x(1) + s12x(2) * s12x(2));
    scale[4 * 1 + 2] = f * s12x(0);
  } else {
    std::array<Mat34, 4> p;
    p[1] << Mat3::Identity(), Vec3::Zero();
    const Vec3 e = Epipole(at(0, 1), EpipoleSide::kLeft);
    p[0] << Skew(e) * at(0, 1), e;
    const std::array<Mat34, 2> k01{p[0], p[1]};
    const std::array<Mat3, 2> f01x{at(0, 3), at(1, 3)};
    p[3] = ResectFromBifocals(k01, f01x);
    const std::array<Mat34, 2> k1x{p[1], p[3]};
    const std::array<Mat3, 2> f1x2{at(1, 2), Mat3(at(2, 3).transpose())};
    p[2] = ResectFromBifocals(k1x, f1x2);
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        scale[4 * a + b] = ConsistentBifocal(p[a], p[b]).cwiseProduct(at(a, b)).sum();
      }
    }
  }
  std::vector<BlockEntry> blocks;
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) blocks.push_back({a, b, scale[4 * a + b] * at(a, b)});
  }
  AssembleOptions options;
  options.normalize = false;
  return NViewBifocal::Assemble(4, kind, blocks, options);
}

}  // namespace bifocal
