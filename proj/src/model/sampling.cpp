#include "model/sampling.hpp"

#include <algorithm>
#include <limits>

namespace ooaf {

std::vector<int> fps(const MatX& points, int count) {
    const int n = static_cast<int>(points.rows());
    if (count > n) throw std::invalid_argument("fps: count exceeds point count");
    Vec3 centroid = points.colwise().mean();
    int start = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i) {
        double d = (points.row(i).transpose() - centroid).squaredNorm();
        if (d > best) {
            best = d;
            start = i;
        }
    }
    std::vector<int> selected{start};
    std::vector<double> min_d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    while (static_cast<int>(selected.size()) < count) {
        const auto last = points.row(selected.back());
        int pick = -1;
        double pick_d2 = -1.0;
        for (int i = 0; i < n; ++i) {
            double d = (points.row(i) - last).squaredNorm();
            if (d < min_d2[static_cast<size_t>(i)]) min_d2[static_cast<size_t>(i)] = d;
            if (min_d2[static_cast<size_t>(i)] > pick_d2) {
                pick_d2 = min_d2[static_cast<size_t>(i)];
                pick = i;
            }
        }
        selected.push_back(pick);
    }
    return selected;
}

std::vector<std::vector<int>> knn_group(const MatX& points, const MatX& centers, int k,
                                        double radius) {
    if (k < 1) throw std::invalid_argument("knn_group: k must be >= 1");
    const int n = static_cast<int>(points.rows());
    const double r2 = radius * radius;
    std::vector<std::vector<int>> groups(static_cast<size_t>(centers.rows()));
    std::vector<std::pair<double, int>> candidates;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        candidates.clear();
        for (int i = 0; i < n; ++i) {
            double d2 = (points.row(i) - centers.row(c)).squaredNorm();
            if (d2 <= r2) candidates.emplace_back(d2, i);
        }
        std::sort(candidates.begin(), candidates.end());
        if (candidates.empty())
            throw std::invalid_argument("knn_group: no point within radius of a center");
        auto& g = groups[static_cast<size_t>(c)];
        g.reserve(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j)
            g.push_back(candidates[std::min<size_t>(static_cast<size_t>(j), candidates.size() - 1)]
                            .second);
    }
    return groups;
}

std::vector<int> nearest_center(const MatX& points, const MatX& centers) {
    std::vector<int> assign(static_cast<size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            double d2 = (points.row(i) - centers.row(c)).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(c);
            }
        }
        assign[static_cast<size_t>(i)] = best;
    }
    return assign;
}

}  // namespace ooaf
