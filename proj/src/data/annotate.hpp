#pragma once

#include <vector>

#include "core/types.hpp"

namespace ooaf {

struct ContactAnnotation {
    std::vector<Vec3> contact_points;  // each within 1e-6 of some cloud point
    double sigma = 0.06;
};

/// Fills one affordance channel with max-over-contacts Gaussian decay:
///   a_j = max_c exp(-||x_j - c||^2 / (2 sigma^2)), values < 1e-4 clamped to 0.
FeatureCloud propagate_labels(const FeatureCloud& cloud, const ContactAnnotation& ann, int channel);

}  // namespace ooaf
