#include "core/se3.hpp"

#include <cmath>

namespace ooaf {

void FeatureCloud::validate() const {
    if (points.rows() < 1) throw std::invalid_argument("cloud must have N >= 1 points");
    if (points.cols() != 3) throw std::invalid_argument("points must be N x 3");
    if (!points.allFinite()) throw std::invalid_argument("non-finite coordinate");
    if (features.rows() != 0 && features.rows() != points.rows())
        throw std::invalid_argument("feature row count mismatch");
    if (!features.allFinite()) throw std::invalid_argument("non-finite feature");
    if (affordance.rows() != 0 && affordance.rows() != points.rows())
        throw std::invalid_argument("affordance row count mismatch");
    if (affordance.size() > 0 &&
        (affordance.minCoeff() < 0.0 || affordance.maxCoeff() > 1.0 || !affordance.allFinite()))
        throw std::invalid_argument("affordance values must lie in [0,1]");
    if (!part_labels.empty() && static_cast<Eigen::Index>(part_labels.size()) != points.rows())
        throw std::invalid_argument("part label count mismatch");
}

void RigidTransform::validate() const {
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > 1e-9)
        throw std::invalid_argument("rotation determinant is not +1");
    if (!translation.allFinite()) throw std::invalid_argument("non-finite translation");
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform out;
    out.rotation = rotation.transpose();
    out.translation = -(rotation.transpose() * translation);
    return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform se3_from_params(const Vec6& p) {
    Vec3 omega = p.head<3>();
    double theta = omega.norm();
    if (theta > M_PI) {
        // wrap: same rotation, angle in [0, pi]
        double wrapped = std::fmod(theta, 2.0 * M_PI);
        if (wrapped > M_PI) {
            omega = -omega * ((2.0 * M_PI - wrapped) / theta);
        } else {
            omega = omega * (wrapped / theta);
        }
        theta = omega.norm();
    }
    Mat3 hat;
    hat << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    RigidTransform t;
    if (theta < 1e-12) {
        // second-order Taylor of Rodrigues
        t.rotation = Mat3::Identity() + hat + 0.5 * hat * hat;
    } else {
        t.rotation = Mat3::Identity() + std::sin(theta) / theta * hat +
                     (1.0 - std::cos(theta)) / (theta * theta) * hat * hat;
    }
    t.translation = p.tail<3>();
    return t;
}

Vec6 se3_to_params(const RigidTransform& t) {
    const Mat3& R = t.rotation;
    double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
    double theta = std::acos(c);
    Vec3 omega;
    if (theta < 1e-8) {
        omega = 0.5 * Vec3(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    } else if (theta > M_PI - 1e-6) {
        // near pi: axis from the symmetric part
        Mat3 A = 0.5 * (R + Mat3::Identity());
        Vec3 axis(std::sqrt(std::max(0.0, A(0, 0))), std::sqrt(std::max(0.0, A(1, 1))),
                  std::sqrt(std::max(0.0, A(2, 2))));
        int k;
        axis.cwiseAbs().maxCoeff(&k);
        if (A(k, (k + 1) % 3) < 0) axis[(k + 1) % 3] = -axis[(k + 1) % 3];
        if (A(k, (k + 2) % 3) < 0) axis[(k + 2) % 3] = -axis[(k + 2) % 3];
        if (axis[k] < 0) axis = -axis;
        omega = theta * axis.normalized();
    } else {
        Vec3 v(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
        omega = theta / (2.0 * std::sin(theta)) * v;
    }
    Vec6 p;
    p.head<3>() = omega;
    p.tail<3>() = t.translation;
    return p;
}

FeatureCloud se3_apply(const RigidTransform& t, const FeatureCloud& cloud) {
    FeatureCloud out = cloud;
    out.points = (cloud.points * t.rotation.transpose()).rowwise() + t.translation.transpose();
    return out;
}

FeatureCloud normalize_cloud(const FeatureCloud& cloud, NormalizeRecord& rec) {
    Vec3 centroid = cloud.points.colwise().mean();
    MatX centered = cloud.points.rowwise() - centroid.transpose();
    double radius = centered.rowwise().norm().maxCoeff();
    if (radius <= 0.0) throw std::invalid_argument("zero extent");
    rec.offset = centroid;
    rec.scale = radius;
    FeatureCloud out = cloud;
    out.points = centered / radius;
    return out;
}

FeatureCloud denormalize_cloud(const FeatureCloud& cloud, const NormalizeRecord& rec) {
    FeatureCloud out = cloud;
    out.points = (cloud.points * rec.scale).rowwise() + rec.offset.transpose();
    return out;
}

ObjectPair normalize_pair(const ObjectPair& pair, NormalizeRecord& src_rec, NormalizeRecord& tgt_rec) {
    ObjectPair out = pair;
    out.source = normalize_cloud(pair.source, src_rec);
    out.target = normalize_cloud(pair.target, tgt_rec);
    return out;
}

}  // namespace ooaf
