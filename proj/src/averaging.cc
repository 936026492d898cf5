#include "bifocal/averaging.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <thread>

#include <Eigen/SVD>

#include "bifocal/error.h"

namespace bifocal {
namespace {

constexpr std::array<std::pair<int, int>, 3> kSlots{{{0, 1}, {0, 2}, {1, 2}}};

// Runs body(k) for k in [0, count) on up to `threads` workers.  Each index is
// written by exactly one worker, so results do not depend on the split.
void ParallelFor(int count, int threads, const std::function<void(int)>& body) {
  threads = std::clamp(threads, 1, std::max(1, count));
  if (threads == 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int k = w; k < count; k += threads) body(k);
    });
  }
  for (auto& t : pool) t.join();
}

struct Layout {
  std::vector<std::pair<int, int>> edges;          // consensus blocks
  std::vector<std::array<int, 3>> slots;           // triplet -> edge ids
  std::vector<std::vector<std::pair<int, int>>> users;  // edge -> (triplet, slot)
};

Layout MakeLayout(const TripletCover& cover) {
  Layout l;
  std::map<std::pair<int, int>, int> ids;
  for (int k = 0; k < static_cast<int>(cover.triplets.size()); ++k) {
    const Triplet& t = cover.triplets[k];
    std::array<int, 3> s{};
    for (int q = 0; q < 3; ++q) {
      const std::pair<int, int> e{t[kSlots[q].first], t[kSlots[q].second]};
      auto [it, fresh] = ids.try_emplace(e, static_cast<int>(l.edges.size()));
      if (fresh) {
        l.edges.push_back(e);
        l.users.emplace_back();
      }
      s[q] = it->second;
      l.users[it->second].push_back({k, q});
    }
    l.slots.push_back(s);
  }
  return l;
}

Eigen::MatrixXd AssembleTriplet(const std::vector<Mat3>& blocks, const std::array<int, 3>& s) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(9, 9);
  for (int q = 0; q < 3; ++q) {
    const auto [a, b] = kSlots[q];
    m.block<3, 3>(3 * a, 3 * b) = blocks[s[q]];
    m.block<3, 3>(3 * b, 3 * a) = blocks[s[q]].transpose();
  }
  return m;
}

// Symmetric average of the (a, b) and transposed (b, a) blocks.
Mat3 SlotBlock(const Eigen::MatrixXd& m, int q) {
  const auto [a, b] = kSlots[q];
  return 0.5 * (m.block<3, 3>(3 * a, 3 * b) + m.block<3, 3>(3 * b, 3 * a).transpose());
}

// The two rotations R with E ~ [u]x R, and the unit left null vector u.
struct EssentialFactors {
  std::array<Mat3, 2> rotations;
  Vec3 direction;
};

EssentialFactors FactorEssential(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU(), v = svd.matrixV();
  if (u.determinant() < 0) u.col(2) *= -1.0;
  if (v.determinant() < 0) v.col(2) *= -1.0;
  Mat3 w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  return {{u * w * v.transpose(), u * w.transpose() * v.transpose()}, u.col(2)};
}

// Per-triplet signed scales in the general essential setting, chained over
// the dual graph so that shared edges agree.  Returns one scale per edge.
std::vector<double> SynchronizeEssentialScales(const std::vector<Mat3>& unit,
                                               const Layout& layout,
                                               const TripletCover& cover) {
  const int m = static_cast<int>(layout.slots.size());
  std::vector<Eigen::Vector3d> local(m);
  for (int k = 0; k < m; ++k) {
    const auto& s = layout.slots[k];
    local[k] = EssentialTripletScales(unit[s[0]], unit[s[1]], unit[s[2]]);
  }
  std::vector<std::vector<int>> adjacent(m);
  for (const auto& [a, b] : cover.dual_edges) {
    adjacent[a].push_back(b);
    adjacent[b].push_back(a);
  }
  std::vector<double> scale(layout.edges.size(), 0.0);
  std::vector<bool> seen(m, false), known(layout.edges.size(), false);
  std::queue<int> queue;
  queue.push(0);
  seen[0] = true;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop();
    const auto& s = layout.slots[k];
    // Fit the local scales to the edges already fixed; a weak shared edge
    // would otherwise dominate.
    double num = 0.0, den = 0.0;
    for (int q = 0; q < 3; ++q) {
      if (!known[s[q]]) continue;
      num += scale[s[q]] * local[k][q];
      den += local[k][q] * local[k][q];
    }
    const double factor = den > 0.0 ? num / den : 1.0;
    for (int q = 0; q < 3; ++q) {
      if (known[s[q]]) continue;
      scale[s[q]] = factor * local[k][q];
      known[s[q]] = true;
    }
    for (int next : adjacent[k]) {
      if (!seen[next]) {
        seen[next] = true;
        queue.push(next);
      }
    }
  }
  double total = 0.0;
  for (double c : scale) total += c * c;
  const double norm = std::sqrt(total / static_cast<double>(scale.size()));
  if (!(norm > 0.0)) throw Error(ErrorCode::kDegenerateGeometry, "essential scales vanish");
  for (double& c : scale) c /= norm;
  return scale;
}

}  // namespace

Eigen::Vector3d EssentialTripletScales(const Mat3& e_ab, const Mat3& e_ac,
                                       const Mat3& e_bc) {
  const EssentialFactors ab = FactorEssential(e_ab), ac = FactorEssential(e_ac),
                         bc = FactorEssential(e_bc);
  // Pick the rotations closing the cycle R_ab R_bc = R_ac.
  double best = std::numeric_limits<double>::infinity();
  Mat3 r_ab, r_ac, r_bc;
  for (const Mat3& x : ab.rotations) {
    for (const Mat3& y : bc.rotations) {
      for (const Mat3& z : ac.rotations) {
        const double gap = (x * y - z).squaredNorm();
        if (gap < best) {
          best = gap;
          r_ab = x;
          r_bc = y;
          r_ac = z;
        }
      }
    }
  }
  // In the frame of a: (t_a - t_b) + (t_b - t_c) - (t_a - t_c) = 0.
  Mat3 closure;
  closure << ab.direction, r_ab * bc.direction, -ac.direction;
  Eigen::JacobiSVD<Mat3> svd(closure, Eigen::ComputeFullV);
  const Vec3 len = svd.matrixV().col(2);
  Eigen::Vector3d out(len(0) * (Skew(ab.direction) * r_ab).cwiseProduct(e_ab).sum(),
                      len(2) * (Skew(ac.direction) * r_ac).cwiseProduct(e_ac).sum(),
                      len(1) * (Skew(bc.direction) * r_bc).cwiseProduct(e_bc).sum());
  const double norm = out.norm();
  if (!(norm > 0.0)) throw Error(ErrorCode::kDegenerateGeometry, "degenerate essential triplet");
  return out / norm;
}

void ValidateConfig(const AdmmConfig& c) {
  if (!(c.rho > 0.0) || c.max_iters <= 0 || !(c.primal_tol > 0.0) ||
      !(c.dual_tol > 0.0) || !(c.rank_tol > 0.0) || c.threads <= 0 ||
      c.burn_in < 0 || !(c.rho_growth >= 1.0) || !(c.rho_max >= c.rho)) {
    throw Error(ErrorCode::kInvalidArgument, "ADMM parameters must be positive");
  }
}

std::string FormatRecord(const IterationRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "{\"iteration\":%d,\"objective\":%.17g,\"primal\":%.17g,\"dual\":%.17g}",
                r.iteration, r.objective, r.primal, r.dual);
  return buf;
}

ProjectionResult ProjectTriplet(const Eigen::MatrixXd& s, Setting setting,
                                TensorKind kind, double rank_tol) {
  if (setting == Setting::kCollinear) {
    return kind == TensorKind::kEssential ? ProjectCollinearEssentialEqual(s, rank_tol)
                                          : ProjectCollinearFundamental(s, rank_tol);
  }
  return kind == TensorKind::kEssential ? ProjectGeneralEssential(s, rank_tol)
                                        : ProjectGeneralFundamental(s, rank_tol);
}

std::vector<TripletProblem> BuildTripletProblems(const NViewBifocal& measured,
                                                 const TripletCover& cover,
                                                 Setting setting) {
  std::vector<TripletProblem> out;
  for (int k = 0; k < static_cast<int>(cover.triplets.size()); ++k) {
    const Triplet& t = cover.triplets[k];
    for (int c : t) {
      if (c < 0 || c >= measured.n()) {
        throw Error(ErrorCode::kIndexOutOfRange, "cover camera outside measurements");
      }
    }
    TripletProblem p;
    p.triplet_id = k;
    p.cameras = t;
    p.setting = setting;
    p.kind = measured.kind();
    p.measured = Eigen::MatrixXd::Zero(9, 9);
    for (int q = 0; q < 3; ++q) {
      const auto [a, b] = kSlots[q];
      const Mat3 blk = NormalizeTensor(measured.Block(t[a], t[b]));
      p.measured.block<3, 3>(3 * a, 3 * b) = blk;
      p.measured.block<3, 3>(3 * b, 3 * a) = blk.transpose();
    }
    out.push_back(std::move(p));
  }
  return out;
}

AveragingResult Average(const NViewBifocal& measured, const TripletCover& cover,
                        Setting setting, const AdmmConfig& config) {
  ValidateConfig(config);
  if (cover.triplets.empty() || !IsConnected(cover)) {
    throw Error(ErrorCode::kNotConnected, "triplet cover is not connected");
  }
  const std::vector<TripletProblem> problems = BuildTripletProblems(measured, cover, setting);
  const Layout layout = MakeLayout(cover);
  const int m = static_cast<int>(problems.size());
  const int n_edges = static_cast<int>(layout.edges.size());
  const TensorKind kind = measured.kind();
  double rho = config.rho;

  std::vector<Mat3> target(n_edges), b(n_edges);
  for (int e = 0; e < n_edges; ++e) {
    const auto [i, j] = layout.edges[e];
    target[e] = NormalizeTensor(measured.Block(i, j));
  }
  if (setting == Setting::kGeneral && kind == TensorKind::kEssential) {
    const std::vector<double> scale = SynchronizeEssentialScales(target, layout, cover);
    for (int e = 0; e < n_edges; ++e) target[e] *= scale[e];
  }
  for (int e = 0; e < n_edges; ++e) b[e] = target[e];
  std::vector<Eigen::MatrixXd> z(m), w(m, Eigen::MatrixXd::Zero(9, 9));
  ParallelFor(m, config.threads, [&](int k) {
    z[k] = ProjectTriplet(AssembleTriplet(b, layout.slots[k]), setting, kind,
                          config.rank_tol).matrix;
  });

  AveragingResult result;
  std::vector<Mat3> previous = b;
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    if (iter > config.burn_in && rho < config.rho_max && result.primal > result.dual) {
      const double grow = std::min(config.rho_growth, config.rho_max / rho);
      rho *= grow;
      for (auto& wk : w) wk /= grow;
    }
    // Consensus step: average the copies and blend with the targets.
    for (int e = 0; e < n_edges; ++e) {
      Mat3 avg = Mat3::Zero();
      for (const auto& [k, q] : layout.users[e]) avg += SlotBlock(z[k] - w[k], q);
      avg /= static_cast<double>(layout.users[e].size());
      b[e] = (2.0 * target[e] + rho * avg) / (2.0 + rho);
    }

    // Constraint step per triplet; diagonal blocks are held at zero through
    // the consensus, so the duals carry them as well.
    std::vector<double> primal_k(m), objective_k(m);
    ParallelFor(m, config.threads, [&](int k) {
      const Eigen::MatrixXd ek = AssembleTriplet(b, layout.slots[k]);
      z[k] = ProjectTriplet(ek + w[k], setting, kind, config.rank_tol).matrix;
      const Eigen::MatrixXd gap = ek - z[k];
      w[k] += gap;
      primal_k[k] = gap.squaredNorm();
      double obj = 0.0;
      for (int q = 0; q < 3; ++q) {
        obj += (SlotBlock(z[k], q) - target[layout.slots[k][q]]).squaredNorm();
      }
      objective_k[k] = 2.0 * obj;
    });

    IterationRecord rec;
    rec.iteration = iter;
    double primal = 0.0, dual = 0.0;
    for (int k = 0; k < m; ++k) {
      primal += primal_k[k];
      rec.objective += objective_k[k];
    }
    for (int e = 0; e < n_edges; ++e) {
      dual += 2.0 * layout.users[e].size() * (b[e] - previous[e]).squaredNorm();
    }
    rec.primal = std::sqrt(primal);
    rec.dual = rho * std::sqrt(dual);
    result.log.push_back(rec);
    result.iterations = iter;
    result.primal = rec.primal;
    result.dual = rec.dual;
    previous = b;
    if (rec.primal < config.primal_tol && rec.dual < config.dual_tol) {
      result.converged = true;
      break;
    }
  }

  std::vector<BlockEntry> entries;
  for (int e = 0; e < n_edges; ++e) {
    entries.push_back({layout.edges[e].first, layout.edges[e].second, b[e]});
  }
  AssembleOptions options;
  options.validate_rank = false;
  result.averaged = NViewBifocal::Assemble(measured.n(), kind, entries, options);
  result.triplet_matrices.resize(m);
  ParallelFor(m, config.threads, [&](int k) {
    result.triplet_matrices[k] = ProjectTriplet(AssembleTriplet(b, layout.slots[k]),
                                                setting, kind, config.rank_tol).matrix;
  });
  return result;
}

}  // namespace bifocal
