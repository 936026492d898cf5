#pragma once

#include <array>
#include <map>
#include <utility>
#include <vector>

#include "bifocal/geometry.h"

namespace bifocal {

using Triplet = std::array<int, 3>;  // ascending camera ids

// Undirected weighted graph on n cameras; weight is the inlier count of the
// pair (1 for synthetic data).
class ViewingGraph {
 public:
  explicit ViewingGraph(int n = 0) : n_(n) {}
  static ViewingGraph Complete(int n);

  int n() const { return n_; }
  void AddEdge(int i, int j, double weight = 1.0);
  bool HasEdge(int i, int j) const;
  double Weight(int i, int j) const;
  const std::map<std::pair<int, int>, double>& edges() const { return edges_; }
  // All 3-cliques in lexicographic order.
  std::vector<Triplet> Triangles() const;

 private:
  int n_;
  std::map<std::pair<int, int>, double> edges_;
};

struct TripletCover {
  std::vector<Triplet> triplets;
  // Pairs (a, b), a < b, of triplet indices sharing exactly two cameras.
  std::vector<std::pair<int, int>> dual_edges;
  // Collinear source triplet -> id of the virtual camera built for it.
  std::map<Triplet, int> virtual_nodes;

  int CameraCount() const;  // 1 + largest camera id
  std::vector<std::pair<int, int>> CoveredEdges() const;
};

Triplet MakeTriplet(int a, int b, int c);
TripletCover MakeCover(std::vector<Triplet> triplets);
std::vector<std::pair<int, int>> DualEdges(const std::vector<Triplet>& triplets);
// Component label per triplet, labels numbered by first appearance.
std::vector<int> DualComponents(const TripletCover& cover);
bool IsConnected(const TripletCover& cover);

TripletCover SequentialCover(int n);
TripletCover HeuristicCover(const ViewingGraph& g);
TripletCover FullCover(const ViewingGraph& g);
TripletCover EnrichConnectivity(const TripletCover& cover,
                                const TripletCover& full_cover);

// 0 for collinear centers, 1 for an equilateral triangle.
double CollinearityScore(const Vec3& a, const Vec3& b, const Vec3& c);
// Same scale from the epipoles of tensors F_ab, F_ac, F_bc (x_a^T F_ab x_b
// = 0): the smallest, over the three views, sine of the angle between the
// two epipoles seen in that view.
double CollinearityScoreFromTensors(const Mat3& f_ab, const Mat3& f_ac, const Mat3& f_bc);

// Replaces each triplet scoring below `threshold` by the three sub-triplets
// of its virtual camera (ids n_cameras, n_cameras + 1, ...), then greedily
// drops triplets whose removal keeps the dual graph connected and every edge
// of the input cover covered.  An edge between two cameras of a virtual group
// stays covered while at least two of the group's sub-triplets remain.
TripletCover InsertVirtualAndPrune(const TripletCover& cover,
                                   const std::vector<double>& scores,
                                   double threshold, int n_cameras);

}  // namespace bifocal
