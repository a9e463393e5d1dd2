#pragma once

#include <cstdint>

#include "planner/terms.hpp"

namespace ooaf {

struct SolveOptions {
    int restarts = 32;
    int max_iters = 500;   // Nelder-Mead iterations per restart
    uint64_t seed = 0;
};

struct OptimizationResult {
    RigidTransform transform;
    double total_score = 0.0;
    std::vector<double> per_term;
    int restarts_run = 0;
    int best_restart_index = -1;
};

/// Random-restart Nelder-Mead over the 6-d axis-angle + translation
/// parameterization. Restart 0 starts at the identity; later restarts draw a
/// uniform random rotation and a translation near the centroid offset between
/// the two functional regions. Deterministic for a fixed seed.
OptimizationResult solve(const ConstraintSpec& spec, const FeatureCloud& src,
                         const FeatureCloud& tgt, int channel, const SolveOptions& options = {});

}  // namespace ooaf
