#include "bifocal/viewing_graph.h"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "bifocal/error.h"

namespace bifocal {
namespace {

std::pair<int, int> Key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

std::array<std::pair<int, int>, 3> TripletEdges(const Triplet& t) {
  return {{{t[0], t[1]}, {t[0], t[2]}, {t[1], t[2]}}};
}

int SharedCount(const Triplet& a, const Triplet& b) {
  int shared = 0;
  for (int x : a) {
    for (int y : b) shared += x == y;
  }
  return shared;
}

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int Find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void Unite(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

std::vector<std::vector<int>> Adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

bool ConnectedWithout(const std::vector<std::vector<int>>& adj,
                      const std::vector<bool>& alive) {
  const int n = static_cast<int>(adj.size());
  int start = -1, count = 0;
  for (int v = 0; v < n; ++v) {
    if (alive[v]) {
      if (start < 0) start = v;
      ++count;
    }
  }
  if (count <= 1) return true;
  std::vector<bool> seen(n, false);
  std::deque<int> queue{start};
  seen[start] = true;
  int reached = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int w : adj[v]) {
      if (alive[w] && !seen[w]) {
        seen[w] = true;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  return reached == count;
}

}  // namespace

ViewingGraph ViewingGraph::Complete(int n) {
  ViewingGraph g(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) g.AddEdge(i, j);
  }
  return g;
}

void ViewingGraph::AddEdge(int i, int j, double weight) {
  if (i == j || i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw Error(ErrorCode::kIndexOutOfRange, "invalid viewing graph edge");
  }
  edges_[Key(i, j)] = weight;
}

bool ViewingGraph::HasEdge(int i, int j) const { return edges_.count(Key(i, j)) > 0; }

double ViewingGraph::Weight(int i, int j) const {
  const auto it = edges_.find(Key(i, j));
  if (it == edges_.end()) throw Error(ErrorCode::kMissingBlock, "no such edge");
  return it->second;
}

std::vector<Triplet> ViewingGraph::Triangles() const {
  std::vector<std::vector<int>> higher(n_);
  for (const auto& [e, w] : edges_) higher[e.first].push_back(e.second);
  std::vector<Triplet> out;
  for (int a = 0; a < n_; ++a) {
    for (std::size_t p = 0; p < higher[a].size(); ++p) {
      const int b = higher[a][p];
      for (std::size_t q = p + 1; q < higher[a].size(); ++q) {
        const int c = higher[a][q];
        if (HasEdge(b, c)) out.push_back({a, b, c});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int TripletCover::CameraCount() const {
  int m = 0;
  for (const Triplet& t : triplets) m = std::max(m, t[2] + 1);
  return m;
}

std::vector<std::pair<int, int>> TripletCover::CoveredEdges() const {
  std::set<std::pair<int, int>> edges;
  for (const Triplet& t : triplets) {
    for (const auto& e : TripletEdges(t)) edges.insert(e);
  }
  return {edges.begin(), edges.end()};
}

Triplet MakeTriplet(int a, int b, int c) {
  Triplet t{a, b, c};
  std::sort(t.begin(), t.end());
  if (t[0] == t[1] || t[1] == t[2]) {
    throw Error(ErrorCode::kInvalidArgument, "triplet needs three distinct cameras");
  }
  return t;
}

std::vector<std::pair<int, int>> DualEdges(const std::vector<Triplet>& triplets) {
  std::map<std::pair<int, int>, std::vector<int>> by_edge;
  for (int k = 0; k < static_cast<int>(triplets.size()); ++k) {
    for (const auto& e : TripletEdges(triplets[k])) by_edge[e].push_back(k);
  }
  std::set<std::pair<int, int>> dual;
  for (const auto& [e, ids] : by_edge) {
    for (std::size_t p = 0; p < ids.size(); ++p) {
      for (std::size_t q = p + 1; q < ids.size(); ++q) {
        // Duplicate triplets share three cameras and are not dual neighbours.
        if (SharedCount(triplets[ids[p]], triplets[ids[q]]) == 2) {
          dual.insert(Key(ids[p], ids[q]));
        }
      }
    }
  }
  return {dual.begin(), dual.end()};
}

TripletCover MakeCover(std::vector<Triplet> triplets) {
  TripletCover cover;
  cover.triplets = std::move(triplets);
  cover.dual_edges = DualEdges(cover.triplets);
  return cover;
}

std::vector<int> DualComponents(const TripletCover& cover) {
  const int m = static_cast<int>(cover.triplets.size());
  UnionFind uf(m);
  for (const auto& [a, b] : cover.dual_edges) uf.Unite(a, b);
  std::vector<int> label(m, -1);
  std::map<int, int> names;
  for (int k = 0; k < m; ++k) {
    const int root = uf.Find(k);
    const auto it = names.try_emplace(root, static_cast<int>(names.size())).first;
    label[k] = it->second;
  }
  return label;
}

bool IsConnected(const TripletCover& cover) {
  const std::vector<int> labels = DualComponents(cover);
  return !labels.empty() && *std::max_element(labels.begin(), labels.end()) == 0;
}

TripletCover SequentialCover(int n) {
  if (n < 3) throw Error(ErrorCode::kTooFewCameras, "sequential cover needs n >= 3");
  std::vector<Triplet> triplets;
  for (int i = 1; i + 1 < n; ++i) triplets.push_back({i - 1, i, i + 1});
  return MakeCover(std::move(triplets));
}

TripletCover FullCover(const ViewingGraph& g) { return MakeCover(g.Triangles()); }

TripletCover HeuristicCover(const ViewingGraph& g) {
  std::vector<Triplet> cliques = g.Triangles();
  if (cliques.empty()) throw Error(ErrorCode::kNoTriangles, "viewing graph has no triangles");
  auto min_weight = [&](const Triplet& t) {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& e : TripletEdges(t)) w = std::min(w, g.Weight(e.first, e.second));
    return w;
  };
  std::stable_sort(cliques.begin(), cliques.end(), [&](const Triplet& a, const Triplet& b) {
    return min_weight(a) > min_weight(b);
  });

  std::vector<Triplet> chosen;
  std::map<std::pair<int, int>, std::vector<int>> by_edge;
  UnionFind uf(static_cast<int>(cliques.size()));
  for (const Triplet& t : cliques) {
    bool new_edge = false;
    std::set<int> roots;
    std::vector<int> neighbours;
    for (const auto& e : TripletEdges(t)) {
      const auto it = by_edge.find(e);
      if (it == by_edge.end()) {
        new_edge = true;
        continue;
      }
      for (int k : it->second) {
        roots.insert(uf.Find(k));
        neighbours.push_back(k);
      }
    }
    if (!new_edge && roots.size() < 2) continue;
    const int id = static_cast<int>(chosen.size());
    chosen.push_back(t);
    for (const auto& e : TripletEdges(t)) by_edge[e].push_back(id);
    for (int k : neighbours) uf.Unite(id, k);
  }
  return MakeCover(std::move(chosen));
}

TripletCover EnrichConnectivity(const TripletCover& cover, const TripletCover& full_cover) {
  TripletCover out = cover;
  std::map<Triplet, int> full_index;
  for (int k = 0; k < static_cast<int>(full_cover.triplets.size()); ++k) {
    full_index.emplace(full_cover.triplets[k], k);
  }
  const int full_m = static_cast<int>(full_cover.triplets.size());
  const auto full_adj = Adjacency(full_m, full_cover.dual_edges);

  while (!out.triplets.empty() && !IsConnected(out)) {
    const std::vector<int> labels = DualComponents(out);
    const int n_comp = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> size(n_comp, 0);
    for (int l : labels) ++size[l];
    std::vector<int> order(n_comp);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return size[a] > size[b]; });
    const int comp_a = order[0], comp_b = order[1];

    // Multi-source BFS in the full dual graph from component A to B.
    std::vector<int> parent(full_m, -2);
    std::vector<bool> target(full_m, false);
    std::deque<int> queue;
    for (int k = 0; k < static_cast<int>(out.triplets.size()); ++k) {
      const auto it = full_index.find(out.triplets[k]);
      if (it == full_index.end()) continue;
      if (labels[k] == comp_a && parent[it->second] == -2) {
        parent[it->second] = -1;
        queue.push_back(it->second);
      } else if (labels[k] == comp_b) {
        target[it->second] = true;
      }
    }
    int hit = -1;
    while (!queue.empty() && hit < 0) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : full_adj[v]) {
        if (parent[w] != -2) continue;
        parent[w] = v;
        if (target[w]) {
          hit = w;
          break;
        }
        queue.push_back(w);
      }
    }
    if (hit < 0) {
      throw Error(ErrorCode::kUnconnectable, "cover components cannot be joined");
    }
    std::set<Triplet> present(out.triplets.begin(), out.triplets.end());
    for (int v = parent[hit]; v >= 0 && parent[v] != -1; v = parent[v]) {
      if (present.insert(full_cover.triplets[v]).second) {
        out.triplets.push_back(full_cover.triplets[v]);
      }
    }
    out.dual_edges = DualEdges(out.triplets);
  }
  return out;
}

double CollinearityScore(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 mean = (a + b + c) / 3.0;
  Eigen::Matrix<double, 3, 3> centered;
  centered << (a - mean).transpose(), (b - mean).transpose(), (c - mean).transpose();
  const Eigen::Vector3d s = Eigen::JacobiSVD<Mat3>(centered).singularValues();
  if (!(s(0) > 0.0)) return 0.0;
  return s(1) / s(0);
}

double CollinearityScoreFromTensors(const Mat3& f_ab, const Mat3& f_ac, const Mat3& f_bc) {
  auto sine = [](const Vec3& u, const Vec3& v) { return u.cross(v).norm(); };
  const double in_a = sine(Epipole(f_ab, EpipoleSide::kLeft), Epipole(f_ac, EpipoleSide::kLeft));
  const double in_b = sine(Epipole(f_ab, EpipoleSide::kRight), Epipole(f_bc, EpipoleSide::kLeft));
  const double in_c = sine(Epipole(f_ac, EpipoleSide::kRight), Epipole(f_bc, EpipoleSide::kRight));
  return std::clamp(std::min({in_a, in_b, in_c}), 0.0, 1.0);
}

TripletCover InsertVirtualAndPrune(const TripletCover& cover,
                                   const std::vector<double>& scores,
                                   double threshold, int n_cameras) {
  if (scores.size() != cover.triplets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one score per triplet required");
  }
  const std::vector<std::pair<int, int>> original = cover.CoveredEdges();

  std::vector<Triplet> triplets;
  std::vector<int> group;  // virtual camera id per triplet, -1 for real
  std::map<Triplet, int> virtual_nodes = cover.virtual_nodes;
  int next_id = std::max(n_cameras, cover.CameraCount());
  for (std::size_t k = 0; k < cover.triplets.size(); ++k) {
    const Triplet& t = cover.triplets[k];
    if (scores[k] >= threshold || t[2] >= n_cameras) {
      triplets.push_back(t);
      group.push_back(t[2] >= n_cameras ? t[2] : -1);
      continue;
    }
    const int x = next_id++;
    virtual_nodes[t] = x;
    for (const auto& [a, b] : TripletEdges(t)) {
      triplets.push_back({a, b, x});
      group.push_back(x);
    }
  }
  if (virtual_nodes.empty()) return cover;

  const int m = static_cast<int>(triplets.size());
  const auto adj = Adjacency(m, DualEdges(triplets));
  std::vector<bool> alive(m, true);
  std::map<int, Triplet> group_cameras;
  for (const auto& [t, x] : virtual_nodes) group_cameras[x] = t;

  auto covered = [&](const std::pair<int, int>& e) {
    std::map<int, int> group_alive;
    for (int k = 0; k < m; ++k) {
      if (!alive[k]) continue;
      const Triplet& t = triplets[k];
      if (std::count(t.begin(), t.end(), e.first) && std::count(t.begin(), t.end(), e.second)) {
        return true;
      }
      if (group[k] >= 0) ++group_alive[group[k]];
    }
    for (const auto& [x, count] : group_alive) {
      const Triplet& src = group_cameras[x];
      if (count >= 2 && std::count(src.begin(), src.end(), e.first) &&
          std::count(src.begin(), src.end(), e.second)) {
        return true;
      }
    }
    return false;
  };

  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return triplets[a] < triplets[b]; });
  for (int k : order) {
    alive[k] = false;
    bool ok = ConnectedWithout(adj, alive);
    for (std::size_t e = 0; ok && e < original.size(); ++e) ok = covered(original[e]);
    if (!ok) alive[k] = true;
  }

  std::vector<Triplet> kept;
  for (int k = 0; k < m; ++k) {
    if (alive[k]) kept.push_back(triplets[k]);
  }
  TripletCover out = MakeCover(std::move(kept));
  out.virtual_nodes = std::move(virtual_nodes);
  return out;
}

}  // namespace bifocal
