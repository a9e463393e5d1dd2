#pragma once

#include <cstdint>
#include <string>

#include "core/types.hpp"

namespace ooaf {

inline const std::vector<std::string> kCategoryNames = {"pour", "hang", "press", "insert", "cut"};

int category_id(const std::string& name);

struct SynthOptions {
    int n_points = 2048;        // per object
    int n_channels = 5;         // K
    int n_contacts = 5;         // contacts per functional part
    double label_sigma = 0.12;  // propagation bandwidth, normalized-ish units
};

/// Deterministic parametric pair for one category. Perturbation in [0, 0.5]
/// gates all instance randomness: at 0, every seed yields identical geometry.
/// Ground-truth affordance is propagated from contacts on the functional part;
/// part labels are recorded. Features are left empty (see synth_features).
ObjectPair generate_pair(const std::string& category, uint64_t instance_seed, double perturbation,
                         const SynthOptions& opt = {});

enum class FeatureMode { parts, none };

/// Part-consistent stand-in features: one fixed unit vector per part id,
/// shared across all instances and categories, plus Gaussian noise.
/// FeatureMode::none emits all-zero features (backbone ablation).
ObjectPair synth_features(const ObjectPair& pair, int feature_dim, uint64_t feature_seed,
                          double noise, FeatureMode mode = FeatureMode::parts);

FeatureCloud synth_features(const FeatureCloud& cloud, int feature_dim, uint64_t feature_seed,
                            double noise, FeatureMode mode = FeatureMode::parts);

/// Removes the points inside a spherical occluder centered at a seeded random
/// surface point; the radius is bisected until the removed fraction lands in
/// [level - 0.02, level + 0.02].
FeatureCloud apply_occlusion(const FeatureCloud& cloud, double level, uint64_t seed);

}  // namespace ooaf
