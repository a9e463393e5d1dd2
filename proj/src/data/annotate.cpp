#include "data/annotate.hpp"

#include <cmath>

namespace ooaf {

FeatureCloud propagate_labels(const FeatureCloud& cloud, const ContactAnnotation& ann, int channel) {
    if (ann.contact_points.empty()) throw std::invalid_argument("empty contact list");
    if (ann.sigma <= 0.0) throw std::invalid_argument("sigma must be > 0");
    if (channel < 0 || channel >= cloud.channels())
        throw std::invalid_argument("affordance channel not allocated");
    for (const auto& c : ann.contact_points) {
        double best = (cloud.points.rowwise() - c.transpose()).rowwise().norm().minCoeff();
        if (best > 1e-6) throw std::invalid_argument("contact point is not on the cloud");
    }
    FeatureCloud out = cloud;
    const double denom = 2.0 * ann.sigma * ann.sigma;
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        double a = 0.0;
        for (const auto& c : ann.contact_points) {
            double d2 = (cloud.points.row(i).transpose() - c).squaredNorm();
            a = std::max(a, std::exp(-d2 / denom));
        }
        out.affordance(i, channel) = a < 1e-4 ? 0.0 : a;
    }
    return out;
}

}  // namespace ooaf
