#pragma once

#include "core/types.hpp"

namespace ooaf {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Rodrigues exponential map. p = (axis-angle omega, translation v).
/// Angles beyond pi are wrapped back into [0, pi].
RigidTransform se3_from_params(const Vec6& p);

/// Logarithm; inverse of se3_from_params up to angle wrapping.
Vec6 se3_to_params(const RigidTransform& t);

/// Maps every point x -> R*x + t. Features and affordance pass through.
FeatureCloud se3_apply(const RigidTransform& t, const FeatureCloud& cloud);

/// Normalizes a cloud to centroid 0, max radius 1. Throws on zero extent.
FeatureCloud normalize_cloud(const FeatureCloud& cloud, NormalizeRecord& rec);
FeatureCloud denormalize_cloud(const FeatureCloud& cloud, const NormalizeRecord& rec);

/// Per-object normalization of a pair (each cloud independently).
ObjectPair normalize_pair(const ObjectPair& pair, NormalizeRecord& src_rec, NormalizeRecord& tgt_rec);

}  // namespace ooaf
