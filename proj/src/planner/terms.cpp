#include "planner/terms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "core/se3.hpp"

namespace ooaf {

MatX AffordanceRegion::gather(const MatX& points) const {
    MatX out(static_cast<Eigen::Index>(indices.size()), 3);
    for (size_t i = 0; i < indices.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = points.row(indices[i]);
    return out;
}

Vec3 AffordanceRegion::weighted_centroid(const MatX& points) const {
    Vec3 acc = Vec3::Zero();
    double wsum = 0.0;
    for (size_t i = 0; i < indices.size(); ++i) {
        acc += weights[static_cast<Eigen::Index>(i)] * points.row(indices[i]).transpose();
        wsum += weights[static_cast<Eigen::Index>(i)];
    }
    return acc / wsum;
}

AffordanceRegion high_affordance_region(const FeatureCloud& cloud, int channel) {
    if (channel < 0 || channel >= cloud.channels())
        throw std::invalid_argument("affordance channel not present");
    VecX a = cloud.affordance.col(channel);
    if (a.maxCoeff() <= 0.0) throw std::runtime_error("no functional region");
    AffordanceRegion region;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] >= 0.5) region.indices.push_back(static_cast<int>(i));
    if (region.indices.size() < 10) {
        // top-50 by value, ties by lowest index
        std::vector<int> order(static_cast<size_t>(a.size()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&a](int x, int y) { return a[x] > a[y]; });
        region.indices.assign(order.begin(),
                              order.begin() + std::min<size_t>(50, order.size()));
        std::sort(region.indices.begin(), region.indices.end());
    }
    region.weights.resize(static_cast<Eigen::Index>(region.indices.size()));
    for (size_t i = 0; i < region.indices.size(); ++i)
        region.weights[static_cast<Eigen::Index>(i)] = a[region.indices[i]];
    return region;
}

namespace {

// weighted principal axis (largest eigenvalue); throws when degenerate
Vec3 principal_axis(const MatX& pts, const VecX& weights, const std::string& term_name) {
    double wsum = weights.sum();
    Vec3 mean = Vec3::Zero();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) mean += weights[i] * pts.row(i).transpose();
    mean /= wsum;
    Mat3 cov = Mat3::Zero();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        Vec3 d = pts.row(i).transpose() - mean;
        cov += weights[i] * d * d.transpose();
    }
    cov /= wsum;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()[2] < 1e-12)
        throw std::runtime_error("degenerate PCA in term " + term_name);
    return eig.eigenvectors().col(2);
}

Vec3 smallest_axis(const MatX& pts, const VecX& weights, const std::string& term_name) {
    if (pts.rows() < 3) throw std::runtime_error("degenerate PCA in term " + term_name);
    double wsum = weights.sum();
    Vec3 mean = Vec3::Zero();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) mean += weights[i] * pts.row(i).transpose();
    mean /= wsum;
    Mat3 cov = Mat3::Zero();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        Vec3 d = pts.row(i).transpose() - mean;
        cov += weights[i] * d * d.transpose();
    }
    cov /= wsum;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()[2] < 1e-12)
        throw std::runtime_error("degenerate PCA in term " + term_name);
    return eig.eigenvectors().col(0);
}

// angle between an (unsigned) axis and the vertical, in degrees, in [0, 90]
double axis_angle_to_vertical(const Vec3& axis) {
    double c = std::abs(axis.normalized().dot(Vec3::UnitZ()));
    return std::acos(std::clamp(c, 0.0, 1.0)) * 180.0 / M_PI;
}

// grid hash for capped nearest-neighbor distance queries
class CappedNN {
  public:
    CappedNN(const MatX& points, double cap) : points_(points), cap_(cap), cell_(cap) {
        for (Eigen::Index i = 0; i < points.rows(); ++i)
            cells_[key(points.row(i).transpose())].push_back(static_cast<int>(i));
    }

    // min(nearest distance, cap)
    double query(const Vec3& p) const {
        long kx = coord(p.x()), ky = coord(p.y()), kz = coord(p.z());
        double best2 = cap_ * cap_;
        for (long dx = -1; dx <= 1; ++dx)
            for (long dy = -1; dy <= 1; ++dy)
                for (long dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find(pack(kx + dx, ky + dy, kz + dz));
                    if (it == cells_.end()) continue;
                    for (int idx : it->second) {
                        double d2 = (points_.row(idx).transpose() - p).squaredNorm();
                        best2 = std::min(best2, d2);
                    }
                }
        return std::sqrt(best2);
    }

  private:
    long coord(double v) const { return static_cast<long>(std::floor(v / cell_)); }
    long long pack(long x, long y, long z) const {
        return ((x & 0x1fffffLL) << 42) | ((y & 0x1fffffLL) << 21) | (z & 0x1fffffLL);
    }
    long long key(const Vec3& p) const { return pack(coord(p.x()), coord(p.y()), coord(p.z())); }

    const MatX& points_;
    double cap_;
    double cell_;
    std::unordered_map<long long, std::vector<int>> cells_;
};

}  // namespace

ObjectiveEvaluator::ObjectiveEvaluator(const ConstraintSpec& spec, const FeatureCloud& src,
                                       const FeatureCloud& tgt, int channel)
    : spec_(spec), src_(src), tgt_(tgt) {
    spec_.validate();
    src_region_ = high_affordance_region(src, channel);
    tgt_region_ = high_affordance_region(tgt, channel);
    src_region_pts_ = src_region_.gather(src.points);
    tgt_region_pts_ = tgt_region_.gather(tgt.points);
    tgt_region_centroid_ = tgt_region_.weighted_centroid(tgt.points);
    tgt_aabb_min_ = tgt_region_pts_.colwise().minCoeff().transpose();
    tgt_aabb_max_ = tgt_region_pts_.colwise().maxCoeff().transpose();
    tgt_contact_z_ = tgt_region_pts_.col(2).maxCoeff();
    for (const auto& term : spec_.terms)
        if (term.type == TermType::perpendicular) {
            tgt_normal_ = smallest_axis(tgt_region_pts_, tgt_region_.weights, "perpendicular");
            tgt_normal_valid_ = true;
        }
}

Vec3 ObjectiveEvaluator::src_region_centroid() const {
    return src_region_.weighted_centroid(src_.points);
}

Vec3 ObjectiveEvaluator::tgt_region_centroid() const { return tgt_region_centroid_; }

double ObjectiveEvaluator::term_score(const ConstraintTerm& term, const RigidTransform& t) const {
    auto transform_rows = [&t](const MatX& pts) -> MatX {
        return (pts * t.rotation.transpose()).rowwise() + t.translation.transpose();
    };
    const MatX region_t = transform_rows(src_region_pts_);
    auto region_centroid = [&]() -> Vec3 {
        Vec3 acc = Vec3::Zero();
        for (Eigen::Index i = 0; i < region_t.rows(); ++i)
            acc += src_region_.weights[i] * region_t.row(i).transpose();
        return acc / src_region_.weights.sum();
    };
    switch (term.type) {
        case TermType::affordance_alignment:
            return (region_centroid() - tgt_region_centroid_).norm();
        case TermType::position_above: {
            const double delta = term.param_or("delta", 0.05);
            Vec3 cs = region_centroid();
            double vertical = std::max(0.0, tgt_region_centroid_.z() + delta - cs.z());
            double horizontal = (cs.head<2>() - tgt_region_centroid_.head<2>()).norm();
            return vertical + horizontal;
        }
        case TermType::orientation_tilt: {
            const double lo = term.param("theta_min");
            const double hi = term.param("theta_max");
            Vec3 axis = principal_axis(region_t, src_region_.weights, "orientation_tilt");
            double angle = axis_angle_to_vertical(axis);
            double dist = angle < lo ? lo - angle : (angle > hi ? angle - hi : 0.0);
            return dist / 90.0;
        }
        case TermType::clearance: {
            const double dmin = term.param("dmin");
            MatX all_t = transform_rows(src_.points);
            CappedNN nn(tgt_.points, dmin);
            double min_dist = dmin;
            for (Eigen::Index i = 0; i < all_t.rows(); ++i)
                min_dist = std::min(min_dist, nn.query(all_t.row(i).transpose()));
            return std::max(0.0, dmin - min_dist) / dmin;
        }
        case TermType::contact_quality: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < region_t.rows(); ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (Eigen::Index j = 0; j < tgt_region_pts_.rows(); ++j)
                    best = std::min(best, (region_t.row(i) - tgt_region_pts_.row(j)).norm());
                acc += best;
            }
            return acc / static_cast<double>(region_t.rows());
        }
        case TermType::stability: {
            MatX all_t = transform_rows(src_.points);
            double z_com = all_t.col(2).mean();
            return std::max(0.0, z_com - tgt_contact_z_);
        }
        case TermType::perpendicular: {
            Vec3 axis = principal_axis(region_t, src_region_.weights, "perpendicular");
            return 1.0 - std::abs(axis.normalized().dot(tgt_normal_.normalized()));
        }
        case TermType::containment: {
            const double inflate = term.param_or("inflate", 0.02);
            long outside = 0;
            for (Eigen::Index i = 0; i < region_t.rows(); ++i) {
                Vec3 p = region_t.row(i).transpose();
                bool in = (p.array() >= tgt_aabb_min_.array() - inflate).all() &&
                          (p.array() <= tgt_aabb_max_.array() + inflate).all();
                outside += in ? 0 : 1;
            }
            return static_cast<double>(outside) / static_cast<double>(region_t.rows());
        }
        case TermType::collision: {
            const double r_pen = term.param_or("r_pen", 0.005);
            MatX all_t = transform_rows(src_.points);
            CappedNN nn(tgt_.points, r_pen);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < all_t.rows(); ++i) {
                double pen = std::max(0.0, r_pen - nn.query(all_t.row(i).transpose()));
                acc += pen * pen / (r_pen * r_pen);
            }
            return acc / static_cast<double>(all_t.rows());
        }
    }
    throw std::invalid_argument("unknown term type");
}

ObjectiveResult ObjectiveEvaluator::evaluate(const RigidTransform& t) const {
    ObjectiveResult result;
    for (const auto& term : spec_.terms) {
        double score = term_score(term, t);
        result.per_term.push_back(score);
        result.total += term.weight * score;
    }
    return result;
}

double eval_term(const ConstraintTerm& term, const FeatureCloud& src, const FeatureCloud& tgt,
                 int channel, const RigidTransform& t) {
    ConstraintSpec spec;
    spec.task = "single";
    spec.terms = {term};
    if (spec.terms[0].weight <= 0.0) spec.terms[0].weight = 1.0;
    return ObjectiveEvaluator(spec, src, tgt, channel).evaluate(t).per_term[0];
}

ObjectiveResult objective(const ConstraintSpec& spec, const FeatureCloud& src,
                          const FeatureCloud& tgt, int channel, const RigidTransform& t) {
    return ObjectiveEvaluator(spec, src, tgt, channel).evaluate(t);
}

}  // namespace ooaf
