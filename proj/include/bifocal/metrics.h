#pragma once

#include <span>
#include <vector>

#include "bifocal/geometry.h"

namespace bifocal {

// Least-squares similarity g ~ s R c + t taking estimated centers onto ground
// truth.  For collinear ground truth the rotation about the line is arbitrary
// and `line_gauge_free` is set.
struct SimilarityAlignment {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  std::vector<double> residuals;
  bool line_gauge_free = false;
};
SimilarityAlignment AlignSimilarity(const std::vector<Vec3>& estimated,
                                    const std::vector<Vec3>& truth);

struct PositionErrors {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};
PositionErrors PositionErrorsAfterAlignment(const std::vector<Vec3>& estimated,
                                            const std::vector<Vec3>& truth);

// Mean pixel distance between observations and reprojections of points
// re-triangulated from the given cameras.  Views without a camera (flag
// false) and tracks left with fewer than two usable views are skipped.
double MeanReprojectionError(std::span<const Mat34> projections,
                             const std::vector<bool>& available,
                             std::span<const Track> tracks);

}  // namespace bifocal
