#pragma once

#include <vector>

#include "core/types.hpp"

namespace ooaf {

/// Greedy farthest point sampling. Start = point farthest from the centroid;
/// each pick maximizes distance to the selected set. All ties break to the
/// lowest index.
std::vector<int> fps(const MatX& points, int count);

/// For each center: the k nearest points within radius (distance ties by
/// lowest index), padded by repeating the nearest qualifying point when fewer
/// than k qualify. The center itself always qualifies.
std::vector<std::vector<int>> knn_group(const MatX& points, const MatX& centers, int k,
                                        double radius);

/// Nearest-center assignment per point, ties by lowest center index.
std::vector<int> nearest_center(const MatX& points, const MatX& centers);

}  // namespace ooaf
