#include "planner/solve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "core/se3.hpp"

namespace ooaf {

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
    // uniform over SO(3) via a random unit quaternion
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

struct NmResult {
    Vec6 params;
    double score;
};

// standard Nelder-Mead (alpha 1, gamma 2, rho 0.5, sigma 0.5); returns the best
// vertex, or score = NaN when a non-finite evaluation occurred
template <typename F>
NmResult nelder_mead(const Vec6& start, const F& f, int max_iters) {
    constexpr int n = 6;
    std::array<Vec6, n + 1> verts;
    std::array<double, n + 1> vals;
    verts[0] = start;
    for (int i = 0; i < n; ++i) {
        verts[i + 1] = start;
        verts[i + 1][i] += i < 3 ? 0.1 : 0.02;  // rotation vs translation step
    }
    for (int i = 0; i <= n; ++i) {
        vals[i] = f(verts[i]);
        if (!std::isfinite(vals[i])) return {start, std::numeric_limits<double>::quiet_NaN()};
    }
    std::array<int, n + 1> order;
    auto sort_order = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&vals](int a, int b) { return vals[a] < vals[b]; });
    };
    for (int iter = 0; iter < max_iters; ++iter) {
        sort_order();
        if (vals[order[n]] - vals[order[0]] < 1e-8) break;
        Vec6 centroid = Vec6::Zero();
        for (int i = 0; i < n; ++i) centroid += verts[order[i]];
        centroid /= n;
        const int worst = order[n];
        auto eval = [&](const Vec6& p, double& out) {
            out = f(p);
            return std::isfinite(out);
        };
        Vec6 refl = centroid + (centroid - verts[worst]);
        double fr;
        if (!eval(refl, fr)) return {start, std::numeric_limits<double>::quiet_NaN()};
        if (fr < vals[order[0]]) {
            Vec6 exp_pt = centroid + 2.0 * (centroid - verts[worst]);
            double fe;
            if (!eval(exp_pt, fe)) return {start, std::numeric_limits<double>::quiet_NaN()};
            if (fe < fr) {
                verts[worst] = exp_pt;
                vals[worst] = fe;
            } else {
                verts[worst] = refl;
                vals[worst] = fr;
            }
        } else if (fr < vals[order[n - 1]]) {
            verts[worst] = refl;
            vals[worst] = fr;
        } else {
            Vec6 contr = fr < vals[worst] ? centroid + 0.5 * (refl - centroid)
                                          : centroid + 0.5 * (verts[worst] - centroid);
            double fc;
            if (!eval(contr, fc)) return {start, std::numeric_limits<double>::quiet_NaN()};
            if (fc < std::min(fr, vals[worst])) {
                verts[worst] = contr;
                vals[worst] = fc;
            } else {
                // shrink toward the best vertex
                for (int i = 1; i <= n; ++i) {
                    int v = order[i];
                    verts[v] = verts[order[0]] + 0.5 * (verts[v] - verts[order[0]]);
                    if (!eval(verts[v], vals[v]))
                        return {start, std::numeric_limits<double>::quiet_NaN()};
                }
            }
        }
    }
    sort_order();
    return {verts[order[0]], vals[order[0]]};
}

}  // namespace

OptimizationResult solve(const ConstraintSpec& spec, const FeatureCloud& src,
                         const FeatureCloud& tgt, int channel, const SolveOptions& options) {
    if (options.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (options.max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    ObjectiveEvaluator evaluator(spec, src, tgt, channel);
    const Vec3 base_shift = evaluator.tgt_region_centroid() - evaluator.src_region_centroid();

    auto score_of = [&evaluator](const Vec6& p) -> double {
        return evaluator.evaluate(se3_from_params(p)).total;
    };

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 0.05);

    OptimizationResult best;
    best.total_score = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.restarts; ++r) {
        Vec6 start;
        if (r == 0) {
            start.setZero();
        } else {
            RigidTransform init;
            init.rotation = random_rotation(rng);
            init.translation = base_shift + Vec3(gauss(rng), gauss(rng), gauss(rng));
            start = se3_to_params(init);
        }
        NmResult local = nelder_mead(start, score_of, options.max_iters);
        ++best.restarts_run;
        if (!std::isfinite(local.score)) continue;
        if (local.score < best.total_score) {
            best.total_score = local.score;
            best.transform = se3_from_params(local.params);
            best.best_restart_index = r;
        }
    }
    if (best.best_restart_index < 0) throw std::runtime_error("all restarts failed");
    best.per_term = evaluator.evaluate(best.transform).per_term;
    return best;
}

}  // namespace ooaf
