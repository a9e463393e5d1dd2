#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ooaf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// A point cloud with per-point semantic features and optional
/// per-point affordance channels / part labels.
struct FeatureCloud {
    MatX points;                   // N x 3
    MatX features;                 // N x n, n may be 0
    MatX affordance;               // N x K, K may be 0, values in [0,1]
    std::vector<int> part_labels;  // empty, or one id per point

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index feature_dim() const { return features.cols(); }
    Eigen::Index channels() const { return affordance.cols(); }
    bool has_parts() const { return !part_labels.empty(); }

    void validate() const;
};

/// SE(3) element stored as rotation matrix + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& x) const { return rotation * x + translation; }
    RigidTransform inverse() const;
    void validate() const;  // orthonormality and det within 1e-9

    static RigidTransform identity() { return {}; }
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

struct AffordanceCategory {
    int id = 0;
    std::string name;
};

struct ObjectPair {
    FeatureCloud source;
    FeatureCloud target;
    AffordanceCategory category;
};

/// Record allowing exact inversion of a normalization.
struct NormalizeRecord {
    Vec3 offset = Vec3::Zero();  // original centroid
    double scale = 1.0;          // original max radius about the centroid
};

// Gravity points along -z of the world frame everywhere in this library.
inline const Vec3 kGravityDir{0.0, 0.0, -1.0};

}  // namespace ooaf
