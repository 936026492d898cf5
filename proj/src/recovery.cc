#include "bifocal/recovery.h"

#include <algorithm>
#include <cmath>
#include <queue>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "bifocal/error.h"

namespace bifocal {
namespace {

constexpr std::array<std::pair<int, int>, 3> kSlots{{{0, 1}, {0, 2}, {1, 2}}};

// Tracks seen in every listed view, restricted to those views and relabelled
// 0, 1, ... in list order.
std::vector<Track> LocalTracks(std::span<const Track> tracks, std::span<const int> views) {
  std::vector<Track> out;
  for (const Track& t : tracks) {
    if (!std::all_of(views.begin(), views.end(), [&](int v) { return t.Observes(v); })) {
      continue;
    }
    Track local = t.Subtrack(views);
    for (std::size_t k = 0; k < views.size(); ++k) local.view_ids[k] = static_cast<int>(k);
    out.push_back(std::move(local));
  }
  return out;
}

Mat34 EuclideanProjection(const Mat3& r, const Vec3& t) {
  Mat34 p;
  p << r.transpose(), -r.transpose() * t;
  return p;
}

void CheckRankTwo(const Mat3& f) {
  const Vec3 s = Eigen::JacobiSVD<Mat3>(f).singularValues();
  if (!(s(1) > 1e-9 * s(0))) {
    throw Error(ErrorCode::kDegenerateEpipole, "tensor null space is not one-dimensional");
  }
}

}  // namespace

TripletCameras RecoverCalibratedCollinearTriplet(const Eigen::MatrixXd& e,
                                                 const Triplet& cameras,
                                                 std::span<const Track> tracks,
                                                 const RecoveryOptions& options) {
  if (e.rows() != 9 || e.cols() != 9) {
    throw Error(ErrorCode::kInvalidArgument, "triplet matrix must be 9x9");
  }
  CertificateTolerances tol;
  tol.residual_tol = options.certificate_tol;
  const ConsistencyCertificate cert = CertifyCollinearEssential(e, tol);
  if (cert.rank_estimate != 4 || !(cert.pattern_residual < options.certificate_tol)) {
    throw Error(ErrorCode::kInconsistentInput, "not a collinear essential triplet");
  }

  // Pairwise poses: pose q relates views (a, b) with rotation R_a^T R_b and
  // direction R_a^T (t_b - t_a).
  std::array<RelativePose, 3> pose;
  for (int q = 0; q < 3; ++q) {
    const auto [a, b] = kSlots[q];
    const std::array<int, 2> views{cameras[a], cameras[b]};
    const std::vector<Track> pair = LocalTracks(tracks, views);
    if (pair.empty()) throw Error(ErrorCode::kInsufficientTracks, "no tracks for a pair");
    pose[q] = RotationFromEssential(
        BifocalTensor(e.block<3, 3>(3 * a, 3 * b), TensorKind::kEssential), pair);
  }
  const Mat3 cycle = pose[0].rotation * pose[2].rotation * pose[1].rotation.transpose();
  if ((cycle - Mat3::Identity()).norm() > options.cycle_tol) {
    throw Error(ErrorCode::kCyclicInconsistency, "pairwise rotations do not close");
  }

  // Absolute rotations from the top eigenvectors of the relative-rotation
  // block matrix, gauge fixed so that camera 0 has R = I.
  Eigen::Matrix<double, 9, 9> g = Eigen::Matrix<double, 9, 9>::Identity();
  for (int q = 0; q < 3; ++q) {
    const auto [a, b] = kSlots[q];
    g.block<3, 3>(3 * a, 3 * b) = pose[q].rotation;
    g.block<3, 3>(3 * b, 3 * a) = pose[q].rotation.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> solver(g);
  Eigen::Matrix<double, 9, 3> v = std::sqrt(3.0) * solver.eigenvectors().rightCols<3>();
  if (v.topRows<3>().determinant() < 0.0) v = -v;
  TripletCameras out;
  out.cameras = cameras;
  out.frame = Frame::kEuclidean;
  const Mat3 r0 = ProjectToRotation(v.topRows<3>()).transpose();
  for (int i = 0; i < 3; ++i) {
    out.rotations[i] = r0.transpose() * ProjectToRotation(v.middleRows<3>(3 * i)).transpose();
  }
  out.rotations[0] = Mat3::Identity();

  // t_0 = 0, t_1 the unit direction of pair (0, 1), t_2 = alpha t_1.
  const Vec3 t1 = out.rotations[0] * pose[0].translation;
  const std::array<Mat34, 2> pair_projections{EuclideanProjection(out.rotations[0], Vec3::Zero()),
                                              EuclideanProjection(out.rotations[1], t1)};
  double num = 0.0, den = 0.0;
  int used = 0;
  for (const Track& t : LocalTracks(tracks, std::span<const int>(cameras))) {
    Track front = t;
    front.view_ids.resize(2);
    front.points.resize(2);
    const Vec4 x = TriangulateDlt(std::span<const Mat34>(pair_projections), front);
    const Mat3 s = Skew(t.points[2].normalized()) * out.rotations[2].transpose();
    const Vec3 lhs = s * x.head<3>();
    const Vec3 rhs = s * t1 * x(3);
    num += lhs.dot(rhs);
    den += rhs.squaredNorm();
    ++used;
  }
  if (used == 0 || !(den > 1e-12 * used)) {
    throw Error(ErrorCode::kInsufficientTracks, "no three-view track off the camera line");
  }
  out.alpha = num / den;
  out.centers = {Vec3::Zero(), t1, out.alpha * t1};
  for (int i = 0; i < 3; ++i) {
    out.projections[i] = EuclideanProjection(out.rotations[i], out.centers[i]);
  }
  return out;
}

TripletCameras RecoverProjectiveCollinearTriplet(const Mat3& f01, const Mat3& f12,
                                                 const Mat3& f02, const Triplet& cameras,
                                                 std::span<const Track> tracks) {
  CheckRankTwo(f01);
  CheckRankTwo(f12);
  CheckRankTwo(f02);
  TripletCameras out;
  out.cameras = cameras;
  out.frame = Frame::kProjective;
  const Vec3 e = Epipole(f01, EpipoleSide::kLeft);
  const Vec3 e2 = Epipole(f12, EpipoleSide::kRight);
  out.projections[1] << Mat3::Identity(), Vec3::Zero();
  out.projections[0] << Skew(e) * f01, e;
  const Mat3 m = Skew(e2) * f12.transpose();

  // Each track fixes only the scalar X^T a, so four are needed.
  const std::vector<Track> local = LocalTracks(tracks, std::span<const int>(cameras));
  if (local.size() < 4) {
    throw Error(ErrorCode::kInsufficientTracks, "need four three-view tracks");
  }
  const std::array<Mat34, 2> pair_projections{out.projections[0], out.projections[1]};
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(3 * local.size(), 4);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    Track front = local[k];
    front.view_ids.resize(2);
    front.points.resize(2);
    Vec4 x;
    try {
      x = TriangulateDlt(std::span<const Mat34>(pair_projections), front);
    } catch (const Error& err) {
      // Points on the camera line cannot be triangulated and carry no
      // information about a.
      if (err.code() != ErrorCode::kDegenerateGeometry) throw;
      continue;
    }
    const Mat3 s = Skew(local[k].points[2].normalized());
    lhs.middleRows<3>(3 * k) = s * e2 * x.transpose();
    rhs.segment<3>(3 * k) = -s * m * x.head<3>();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (!(sv(3) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::kDegenerateEpipole, "tracks do not determine the free vector");
  }
  out.a = svd.solve(rhs);
  out.projections[2] << m, Vec3::Zero();
  out.projections[2] += e2 * out.a.transpose();
  return out;
}

namespace {

// Local -> global similarity X_g = s Q X_l + c.
struct Similarity {
  Mat3 q = Mat3::Identity();
  double s = 1.0;
  Vec3 c = Vec3::Zero();
};

struct PoseSum {
  Mat3 rotation = Mat3::Zero();
  Vec3 center = Vec3::Zero();
  int count = 0;
  Mat3 Rotation() const { return ProjectToRotation(rotation); }
  Vec3 Center() const { return center / count; }
};

Similarity AlignEuclidean(const TripletCameras& t, const std::vector<PoseSum>& known) {
  std::vector<int> shared;
  for (int i = 0; i < 3; ++i) {
    if (known[t.cameras[i]].count > 0) shared.push_back(i);
  }
  Similarity sim;
  Mat3 sum = Mat3::Zero();
  for (int i : shared) sum += known[t.cameras[i]].Rotation() * t.rotations[i].transpose();
  sim.q = ProjectToRotation(sum);
  // Scale from the baseline between the first two shared cameras.
  const Vec3 dl = sim.q * (t.centers[shared[1]] - t.centers[shared[0]]);
  const Vec3 dg = known[t.cameras[shared[1]]].Center() - known[t.cameras[shared[0]]].Center();
  double extent = 0.0;
  for (const Vec3& c : t.centers) extent = std::max(extent, c.norm());
  if (!(dl.norm() > 1e-10 * extent)) {
    throw Error(ErrorCode::kAlignmentIllConditioned, "shared cameras coincide");
  }
  sim.s = dl.dot(dg) / dl.squaredNorm();
  for (int i : shared) {
    sim.c += known[t.cameras[i]].Center() - sim.s * sim.q * t.centers[i];
  }
  sim.c /= static_cast<double>(shared.size());
  return sim;
}

// H with P_local H ~ P_global for the shared cameras.
Eigen::Matrix4d AlignProjective(const TripletCameras& t, const std::vector<Mat34>& known,
                                const std::vector<bool>& seen) {
  std::vector<int> shared;
  for (int i = 0; i < 3; ++i) {
    if (seen[t.cameras[i]]) shared.push_back(i);
  }
  const int m = static_cast<int>(shared.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(12 * m, 16 + m);
  for (int k = 0; k < m; ++k) {
    const Mat34& pl = t.projections[shared[k]];
    const Mat34 pg = known[t.cameras[shared[k]]];
    // Column-major vec(P_l H) = (I_4 kron P_l) vec(H).
    for (int col = 0; col < 4; ++col) {
      a.block<3, 4>(12 * k + 3 * col, 4 * col) = pl;
      a.block<3, 1>(12 * k + 3 * col, 16 + k) = -pg.col(col);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::Index n = sv.size();
  if (!(sv(n - 2) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::kAlignmentIllConditioned, "homography not determined");
  }
  const Eigen::VectorXd h = svd.matrixV().col(a.cols() - 1);
  Eigen::Matrix4d out;
  for (int col = 0; col < 4; ++col) out.col(col) = h.segment<4>(4 * col);
  return out / out.norm();
}

// Distance between projections up to scale, relative to |b|.
double ScaledDistance(const Mat34& a, const Mat34& b) {
  const double lambda = a.cwiseProduct(b).sum() / a.squaredNorm();
  return (lambda * a - b).norm() / b.norm();
}

}  // namespace

Registration RegisterGlobal(const std::vector<TripletCameras>& triplets,
                            const TripletCover& cover, Frame frame) {
  if (triplets.size() != cover.triplets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one recovered triplet per cover triplet");
  }
  if (triplets.empty() || !IsConnected(cover)) {
    throw Error(ErrorCode::kNotConnected, "triplet cover is not connected");
  }
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    if (triplets[k].cameras != cover.triplets[k] || triplets[k].frame != frame) {
      throw Error(ErrorCode::kInvalidArgument, "recovered triplet does not match the cover");
    }
  }
  const int n = cover.CameraCount();
  const int m = static_cast<int>(triplets.size());
  std::vector<std::vector<int>> adjacent(m);
  for (const auto& [a, b] : cover.dual_edges) {
    adjacent[a].push_back(b);
    adjacent[b].push_back(a);
  }
  for (auto& list : adjacent) std::sort(list.begin(), list.end());

  Registration out;
  out.projections.assign(n, Mat34::Zero());
  out.recovered.assign(n, false);
  std::vector<PoseSum> poses(n);
  std::vector<bool> visited(m, false);
  std::queue<int> queue;
  queue.push(0);
  visited[0] = true;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop();
    const TripletCameras& t = triplets[k];
    if (frame == Frame::kEuclidean) {
      const Similarity sim = k == 0 ? Similarity{} : AlignEuclidean(t, poses);
      for (int i = 0; i < 3; ++i) {
        PoseSum& p = poses[t.cameras[i]];
        const Mat3 r = sim.q * t.rotations[i];
        const Vec3 c = sim.s * sim.q * t.centers[i] + sim.c;
        if (p.count > 0) {
          out.revisit_residual = std::max(
              out.revisit_residual, (r - p.Rotation()).norm() + (c - p.Center()).norm());
        }
        p.rotation += r;
        p.center += c;
        ++p.count;
        out.recovered[t.cameras[i]] = true;
      }
    } else {
      const Eigen::Matrix4d h =
          k == 0 ? Eigen::Matrix4d::Identity() : AlignProjective(t, out.projections, out.recovered);
      for (int i = 0; i < 3; ++i) {
        Mat34 p = t.projections[i] * h;
        p /= p.norm();
        const int id = t.cameras[i];
        if (out.recovered[id]) {
          out.revisit_residual = std::max(out.revisit_residual, ScaledDistance(p, out.projections[id]));
          continue;
        }
        out.projections[id] = p;
        out.recovered[id] = true;
      }
    }
    for (int next : adjacent[k]) {
      if (!visited[next]) {
        visited[next] = true;
        queue.push(next);
      }
    }
  }
  if (frame == Frame::kEuclidean) {
    out.rotations.assign(n, Mat3::Identity());
    out.centers.assign(n, Vec3::Zero());
    for (int i = 0; i < n; ++i) {
      if (poses[i].count == 0) continue;
      out.rotations[i] = poses[i].Rotation();
      out.centers[i] = poses[i].Center();
      out.projections[i] = EuclideanProjection(out.rotations[i], out.centers[i]);
    }
  }
  return out;
}

}  // namespace bifocal
