#pragma once

#include <vector>

#include "core/types.hpp"
#include "planner/spec.hpp"

namespace ooaf {

struct AffordanceRegion {
    std::vector<int> indices;
    VecX weights;  // the affordance values of the selected points

    MatX gather(const MatX& points) const;
    Vec3 weighted_centroid(const MatX& points) const;
};

/// Points with a >= 0.5 (weights = their values); top-50 fallback when fewer
/// than 10 qualify. Throws on an all-zero channel.
AffordanceRegion high_affordance_region(const FeatureCloud& cloud, int channel);

double eval_term(const ConstraintTerm& term, const FeatureCloud& src, const FeatureCloud& tgt,
                 int channel, const RigidTransform& t);

struct ObjectiveResult {
    double total = 0.0;
    std::vector<double> per_term;
};

ObjectiveResult objective(const ConstraintSpec& spec, const FeatureCloud& src,
                          const FeatureCloud& tgt, int channel, const RigidTransform& t);

/// Precomputed target-side state for repeated evaluation during optimization.
class ObjectiveEvaluator {
  public:
    ObjectiveEvaluator(const ConstraintSpec& spec, const FeatureCloud& src,
                       const FeatureCloud& tgt, int channel);
    ObjectiveResult evaluate(const RigidTransform& t) const;
    const AffordanceRegion& src_region() const { return src_region_; }
    const AffordanceRegion& tgt_region() const { return tgt_region_; }
    Vec3 src_region_centroid() const;
    Vec3 tgt_region_centroid() const;

  private:
    double term_score(const ConstraintTerm& term, const RigidTransform& t) const;

    ConstraintSpec spec_;
    const FeatureCloud& src_;
    const FeatureCloud& tgt_;
    AffordanceRegion src_region_, tgt_region_;
    MatX src_region_pts_;  // untransformed
    MatX tgt_region_pts_;
    Vec3 tgt_region_centroid_;
    Vec3 tgt_aabb_min_, tgt_aabb_max_;
    double tgt_contact_z_ = 0.0;  // max z of the target region
    Vec3 tgt_normal_;             // smallest PCA axis of the target region
    bool tgt_normal_valid_ = false;
};

}  // namespace ooaf
