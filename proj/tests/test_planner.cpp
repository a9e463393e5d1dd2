#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "core/se3.hpp"
#include "data/synth.hpp"
#include "planner/solve.hpp"
#include "planner/spec.hpp"
#include "planner/terms.hpp"

using namespace ooaf;

namespace {

// n points scattered in a ball around `center` with affordance `a` on channel 0
FeatureCloud blob(const Vec3& center, double radius, double a, int n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    FeatureCloud c;
    c.points.resize(n, 3);
    c.features.resize(n, 0);
    c.affordance = MatX::Constant(n, 1, a);
    for (int i = 0; i < n; ++i) {
        Vec3 p;
        do p = {uni(rng), uni(rng), uni(rng)};
        while (p.norm() > 1.0);
        c.points.row(i) = (center + radius * p).transpose();
    }
    return c;
}

// points along a segment through `center` in direction `dir`
FeatureCloud rod(const Vec3& center, const Vec3& dir, double half_len, double a, int n) {
    FeatureCloud c;
    c.points.resize(n, 3);
    c.features.resize(n, 0);
    c.affordance = MatX::Constant(n, 1, a);
    Vec3 d = dir.normalized();
    for (int i = 0; i < n; ++i) {
        double s = -half_len + 2.0 * half_len * i / (n - 1);
        c.points.row(i) = (center + s * d).transpose();
    }
    return c;
}

ConstraintTerm single(TermType type, std::map<std::string, double> params = {}) {
    ConstraintTerm t;
    t.type = type;
    t.weight = 1.0;
    t.params = std::move(params);
    return t;
}

}  // namespace

TEST_CASE("high_affordance_region thresholds at 0.5 with a top-50 fallback") {
    FeatureCloud c = blob(Vec3::Zero(), 1.0, 0.0, 300, 1);
    for (int i = 0; i < 100; ++i) c.affordance(3 * i, 0) = 0.6 + 0.001 * i;

    AffordanceRegion r = high_affordance_region(c, 0);
    REQUIRE(r.indices.size() == 100);
    for (int i = 0; i < 100; ++i) {
        CHECK(r.indices[static_cast<size_t>(i)] == 3 * i);
        CHECK(r.weights[i] == c.affordance(3 * i, 0));
    }

    SUBCASE("weighted centroid matches the direct sum") {
        Vec3 expect = Vec3::Zero();
        double wsum = 0.0;
        for (size_t i = 0; i < r.indices.size(); ++i) {
            expect += r.weights[static_cast<Eigen::Index>(i)] *
                      c.points.row(r.indices[i]).transpose();
            wsum += r.weights[static_cast<Eigen::Index>(i)];
        }
        expect /= wsum;
        CHECK((r.weighted_centroid(c.points) - expect).norm() < 1e-12);
    }
    SUBCASE("sparse channels fall back to the top 50") {
        FeatureCloud sparse = blob(Vec3::Zero(), 1.0, 0.0, 2048, 2);
        sparse.affordance(5, 0) = 0.9;
        sparse.affordance(7, 0) = 0.8;
        sparse.affordance(11, 0) = 0.7;
        for (int i = 100; i < 2048; ++i) sparse.affordance(i, 0) = 0.001 + 1e-6 * i;
        AffordanceRegion fb = high_affordance_region(sparse, 0);
        CHECK(fb.indices.size() == 50);
        CHECK(std::is_sorted(fb.indices.begin(), fb.indices.end()));
        for (int required : {5, 7, 11})
            CHECK(std::find(fb.indices.begin(), fb.indices.end(), required) != fb.indices.end());
    }
    SUBCASE("an all-zero channel has no functional region") {
        FeatureCloud zero = blob(Vec3::Zero(), 1.0, 0.0, 64, 3);
        CHECK_THROWS_WITH_AS(high_affordance_region(zero, 0), "no functional region",
                             std::runtime_error);
    }
}

TEST_CASE("affordance_alignment measures region-centroid distance") {
    FeatureCloud src = blob(Vec3(0, 0, 0), 0.1, 0.9, 64, 4);
    FeatureCloud tgt = blob(Vec3(0.4, -0.2, 0.3), 0.1, 0.9, 64, 5);
    RigidTransform identity;
    double at_identity = eval_term(single(TermType::affordance_alignment), src, tgt, 0, identity);
    ObjectiveEvaluator ev(ConstraintSpec{"t", {single(TermType::affordance_alignment)}}, src, tgt, 0);
    double expect = (ev.src_region_centroid() - ev.tgt_region_centroid()).norm();
    CHECK(at_identity == doctest::Approx(expect).epsilon(1e-12));

    RigidTransform shift;
    shift.translation = ev.tgt_region_centroid() - ev.src_region_centroid();
    CHECK(eval_term(single(TermType::affordance_alignment), src, tgt, 0, shift) < 1e-9);
}

TEST_CASE("clearance boundary values") {
    const double dmin = 0.05;
    FeatureCloud src = blob(Vec3(0, 0, 0), 0.02, 0.9, 32, 6);
    RigidTransform identity;

    SUBCASE("objects 2*dmin apart score 0") {
        // nearest gap exactly 2*dmin via two single-point-ish clouds
        FeatureCloud a = blob(Vec3::Zero(), 0.0, 0.9, 4, 7);
        FeatureCloud b = blob(Vec3(2 * dmin, 0, 0), 0.0, 0.9, 4, 8);
        CHECK(eval_term(single(TermType::clearance, {{"dmin", dmin}}), a, b, 0, identity) == 0.0);
    }
    SUBCASE("contact scores 1") {
        FeatureCloud touching = src;  // identical clouds: min distance 0
        CHECK(eval_term(single(TermType::clearance, {{"dmin", dmin}}), src, touching, 0,
                        identity) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("half gap scores one half") {
        FeatureCloud a = blob(Vec3::Zero(), 0.0, 0.9, 4, 7);
        FeatureCloud b = blob(Vec3(dmin / 2, 0, 0), 0.0, 0.9, 4, 8);
        CHECK(eval_term(single(TermType::clearance, {{"dmin", dmin}}), a, b, 0, identity) ==
              doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("orientation_tilt folds the axis angle into [0, 90]") {
    FeatureCloud tgt = blob(Vec3(1, 1, 0), 0.1, 0.9, 32, 9);
    RigidTransform identity;
    auto tilt_term = single(TermType::orientation_tilt, {{"theta_min", 30.0}, {"theta_max", 60.0}});
    auto rod_at = [&](double deg) {
        double rad = deg * M_PI / 180.0;
        return rod(Vec3::Zero(), Vec3(std::sin(rad), 0, std::cos(rad)), 0.3, 0.9, 41);
    };
    CHECK(eval_term(tilt_term, rod_at(45.0), tgt, 0, identity) < 1e-9);
    CHECK(eval_term(tilt_term, rod_at(30.0), tgt, 0, identity) < 1e-9);
    CHECK(eval_term(tilt_term, rod_at(75.0), tgt, 0, identity) ==
          doctest::Approx(15.0 / 90.0).epsilon(1e-9));
    CHECK(eval_term(tilt_term, rod_at(10.0), tgt, 0, identity) ==
          doctest::Approx(20.0 / 90.0).epsilon(1e-9));
    // 120 degrees folds to 60 -> inside the band
    CHECK(eval_term(tilt_term, rod_at(120.0), tgt, 0, identity) < 1e-9);
}

TEST_CASE("position_above penalizes being below plus horizontal offset") {
    auto term = single(TermType::position_above, {{"delta", 0.05}});
    RigidTransform identity;
    FeatureCloud tgt = blob(Vec3(0, 0, 0), 0.0, 0.9, 4, 10);

    FeatureCloud above = blob(Vec3(0, 0, 0.2), 0.0, 0.9, 4, 11);
    CHECK(eval_term(term, above, tgt, 0, identity) == doctest::Approx(0.0).epsilon(1e-12));

    FeatureCloud below = blob(Vec3(0.3, 0.4, -0.1), 0.0, 0.9, 4, 12);
    // max(0, 0 + 0.05 - (-0.1)) + ||(0.3, 0.4)|| = 0.15 + 0.5
    CHECK(eval_term(term, below, tgt, 0, identity) == doctest::Approx(0.65).epsilon(1e-9));
}

TEST_CASE("stability compares the center of mass with the support height") {
    auto term = single(TermType::stability);
    RigidTransform identity;
    FeatureCloud tgt = blob(Vec3(0, 0, 0.5), 0.0, 0.9, 4, 13);  // support z = 0.5
    FeatureCloud low = blob(Vec3(0, 0, 0.2), 0.0, 0.9, 4, 14);
    CHECK(eval_term(term, low, tgt, 0, identity) == 0.0);
    FeatureCloud high = blob(Vec3(0, 0, 0.8), 0.0, 0.9, 4, 15);
    CHECK(eval_term(term, high, tgt, 0, identity) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("perpendicular compares the source axis with the target plane normal") {
    // planar target region in z = 0: smallest PCA axis is +-z
    FeatureCloud plane;
    plane.points.resize(64, 3);
    plane.features.resize(64, 0);
    plane.affordance = MatX::Constant(64, 1, 0.9);
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 64; ++i) plane.points.row(i) << uni(rng), 0.7 * uni(rng), 0.0;

    auto term = single(TermType::perpendicular);
    RigidTransform identity;
    CHECK(eval_term(term, rod(Vec3(0, 0, 1), Vec3(0, 0, 1), 0.3, 0.9, 21), plane, 0, identity) <
          1e-9);
    CHECK(eval_term(term, rod(Vec3(0, 0, 1), Vec3(1, 0, 0), 0.3, 0.9, 21), plane, 0, identity) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("containment counts region points outside the inflated box") {
    auto term = single(TermType::containment, {{"inflate", 0.02}});
    RigidTransform identity;
    FeatureCloud tgt = blob(Vec3::Zero(), 0.3, 0.9, 128, 17);

    FeatureCloud inside = blob(Vec3::Zero(), 0.05, 0.9, 32, 18);
    CHECK(eval_term(term, inside, tgt, 0, identity) == 0.0);

    FeatureCloud outside = blob(Vec3(5, 5, 5), 0.05, 0.9, 32, 19);
    CHECK(eval_term(term, outside, tgt, 0, identity) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("collision penalizes penetration quadratically") {
    auto term = single(TermType::collision, {{"r_pen", 0.005}});
    RigidTransform identity;
    FeatureCloud a = blob(Vec3::Zero(), 0.1, 0.9, 64, 20);
    FeatureCloud far = blob(Vec3(1, 0, 0), 0.1, 0.9, 64, 21);
    CHECK(eval_term(term, a, far, 0, identity) == 0.0);
    // identical clouds: every nearest-neighbor distance is 0
    CHECK(eval_term(term, a, a, 0, identity) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("contact_quality is the mean region-to-region distance") {
    auto term = single(TermType::contact_quality);
    RigidTransform identity;
    FeatureCloud tgt = blob(Vec3::Zero(), 0.1, 0.9, 64, 22);
    CHECK(eval_term(term, tgt, tgt, 0, identity) == 0.0);

    FeatureCloud one = blob(Vec3::Zero(), 0.0, 0.9, 4, 23);
    FeatureCloud other = blob(Vec3(0.2, 0, 0), 0.0, 0.9, 4, 24);
    CHECK(eval_term(term, one, other, 0, identity) == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("degenerate PCA is reported by term name") {
    auto term = single(TermType::orientation_tilt, {{"theta_min", 0.0}, {"theta_max", 10.0}});
    FeatureCloud point = blob(Vec3::Zero(), 0.0, 0.9, 8, 25);  // all points coincide
    FeatureCloud tgt = blob(Vec3(1, 0, 0), 0.1, 0.9, 16, 26);
    try {
        eval_term(term, point, tgt, 0, RigidTransform{});
        FAIL("expected degenerate PCA error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("degenerate PCA") != std::string::npos);
    }
}

TEST_CASE("every term is non-negative and finite on generated objects") {
    SynthOptions opt;
    opt.n_points = 128;
    ObjectPair pair = generate_pair("pour", 2, 0.3, opt);
    std::mt19937_64 rng(27);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (TermType type :
         {TermType::affordance_alignment, TermType::position_above, TermType::orientation_tilt,
          TermType::clearance, TermType::contact_quality, TermType::stability,
          TermType::perpendicular, TermType::containment, TermType::collision}) {
        ConstraintTerm term = single(type, {{"theta_min", 20.0}, {"theta_max", 70.0},
                                            {"dmin", 0.05}, {"delta", 0.05},
                                            {"inflate", 0.02}, {"r_pen", 0.005}});
        for (int trial = 0; trial < 3; ++trial) {
            Vec6 p;
            for (int i = 0; i < 6; ++i) p[i] = 0.3 * gauss(rng);
            double s = eval_term(term, pair.source, pair.target, 0, se3_from_params(p));
            CHECK(std::isfinite(s));
            CHECK(s >= 0.0);
        }
    }
}

TEST_CASE("objective is the weighted sum of its terms") {
    SynthOptions opt;
    opt.n_points = 128;
    ObjectPair pair = generate_pair("hang", 4, 0.3, opt);
    ConstraintSpec spec = builtin_spec("hang");
    RigidTransform t = se3_from_params((Vec6() << 0.2, -0.1, 0.3, 0.05, 0.0, -0.02).finished());

    ObjectiveResult res = objective(spec, pair.source, pair.target, 1, t);
    REQUIRE(res.per_term.size() == spec.terms.size());
    double total = 0.0;
    for (size_t i = 0; i < spec.terms.size(); ++i) {
        double alone = eval_term(spec.terms[i], pair.source, pair.target, 1, t);
        CHECK(res.per_term[i] == doctest::Approx(alone).epsilon(1e-12));
        total += spec.terms[i].weight * alone;
    }
    CHECK(res.total == doctest::Approx(total).epsilon(1e-9));

    SUBCASE("doubling weights doubles the total") {
        ConstraintSpec doubled = spec;
        for (auto& term : doubled.terms) term.weight *= 2.0;
        ObjectiveResult res2 = objective(doubled, pair.source, pair.target, 1, t);
        CHECK(res2.total == doctest::Approx(2.0 * res.total).epsilon(1e-9));
    }
}

TEST_CASE("terms are invariant under a common quarter-turn about z") {
    SynthOptions opt;
    opt.n_points = 128;
    ObjectPair pair = generate_pair("press", 6, 0.3, opt);
    RigidTransform t = se3_from_params((Vec6() << 0.3, 0.1, -0.2, 0.04, -0.03, 0.05).finished());

    RigidTransform g;
    g.rotation = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()).toRotationMatrix();
    g.translation = Vec3(0.4, -0.7, 0.2);
    RigidTransform g_inv;
    g_inv.rotation = g.rotation.transpose();
    g_inv.translation = -(g.rotation.transpose() * g.translation);
    RigidTransform conj = compose(g, compose(t, g_inv));

    FeatureCloud src_g = se3_apply(g, pair.source);
    FeatureCloud tgt_g = se3_apply(g, pair.target);

    for (TermType type :
         {TermType::affordance_alignment, TermType::position_above, TermType::orientation_tilt,
          TermType::clearance, TermType::contact_quality, TermType::stability,
          TermType::perpendicular, TermType::containment, TermType::collision}) {
        ConstraintTerm term = single(type, {{"theta_min", 20.0}, {"theta_max", 70.0},
                                            {"dmin", 0.05}, {"delta", 0.05},
                                            {"inflate", 0.02}, {"r_pen", 0.005}});
        double before = eval_term(term, pair.source, pair.target, 2, t);
        double after = eval_term(term, src_g, tgt_g, 2, conj);
        CHECK(std::abs(before - after) < 1e-9);
    }
}

TEST_CASE("built-in specs reproduce the published weights") {
    ConstraintSpec pour = builtin_spec("pour");
    REQUIRE(pour.terms.size() == 4);
    CHECK(pour.terms[0].weight == 0.3);
    CHECK(pour.terms[1].weight == 0.2);
    CHECK(pour.terms[2].weight == 0.3);
    CHECK(pour.terms[3].weight == 0.1);
    CHECK(pour.terms[2].param("theta_min") == 30.0);
    CHECK(pour.terms[2].param("theta_max") == 60.0);

    ConstraintSpec cut = builtin_spec("cut");
    REQUIRE(cut.terms.size() == 3);
    CHECK(cut.terms[0].weight == 0.4);
    CHECK(cut.terms[1].weight == 0.4);
    CHECK(cut.terms[2].weight == 0.2);

    for (const auto& task : {"pour", "hang", "cut", "press", "insert"})
        CHECK_NOTHROW(builtin_spec(task).validate());
    CHECK_THROWS_AS(builtin_spec("fly"), std::invalid_argument);
}

TEST_CASE("spec JSON round-trips and validates") {
    ConstraintSpec spec = builtin_spec("insert");
    ConstraintSpec back = parse_spec(spec_to_json(spec));
    CHECK(back.task == spec.task);
    REQUIRE(back.terms.size() == spec.terms.size());
    for (size_t i = 0; i < spec.terms.size(); ++i) {
        CHECK(back.terms[i].type == spec.terms[i].type);
        CHECK(back.terms[i].weight == spec.terms[i].weight);
        CHECK(back.terms[i].params == spec.terms[i].params);
    }

    CHECK_THROWS_AS(parse_spec(R"({"task":"x","terms":[]})"), std::invalid_argument);
    CHECK_THROWS_AS(
        parse_spec(R"({"task":"x","terms":[{"type":"levitate","weight":1,"params":{}}]})"),
        std::invalid_argument);
    CHECK_THROWS_AS(
        parse_spec(
            R"({"task":"x","terms":[{"type":"clearance","weight":-1,"params":{"dmin":0.05}}]})"),
        std::invalid_argument);
}

TEST_CASE("pouring above and tilted beats pouring from below") {
    SynthOptions opt;
    opt.n_points = 512;
    ObjectPair pair = generate_pair("pour", 8, 0.2, opt);
    ConstraintSpec spec = builtin_spec("pour");
    ObjectiveEvaluator ev(spec, pair.source, pair.target, 0);

    RigidTransform tilted;
    tilted.rotation = Eigen::AngleAxisd(M_PI / 4.0, Vec3::UnitY()).toRotationMatrix();
    tilted.translation =
        ev.tgt_region_centroid() + Vec3(0, 0, 0.12) - tilted.rotation * ev.src_region_centroid();

    RigidTransform below;
    below.translation = ev.tgt_region_centroid() + Vec3(0, 0, -0.4) - ev.src_region_centroid();

    CHECK(ev.evaluate(tilted).total < ev.evaluate(below).total);
}

TEST_CASE("solve recovers a planted translation") {
    FeatureCloud src = blob(Vec3(0.5, -0.3, 0.2), 0.05, 0.9, 96, 30);
    FeatureCloud tgt = blob(Vec3(-0.2, 0.4, -0.1), 0.05, 0.9, 96, 31);
    ConstraintSpec spec{"align", {single(TermType::affordance_alignment)}};

    SolveOptions opt;
    opt.restarts = 6;
    opt.max_iters = 300;
    opt.seed = 5;
    OptimizationResult res = solve(spec, src, tgt, 0, opt);

    ObjectiveEvaluator ev(spec, src, tgt, 0);
    Vec3 moved = res.transform.apply(ev.src_region_centroid());
    CHECK((moved - ev.tgt_region_centroid()).norm() < 1e-3);
    CHECK(res.total_score < 1e-3);
    CHECK(res.restarts_run == 6);
    CHECK(res.best_restart_index >= 0);

    SUBCASE("deterministic for a fixed seed") {
        OptimizationResult again = solve(spec, src, tgt, 0, opt);
        CHECK(again.total_score == res.total_score);
        CHECK(again.best_restart_index == res.best_restart_index);
        CHECK((again.transform.rotation - res.transform.rotation).cwiseAbs().maxCoeff() == 0.0);
        CHECK((again.transform.translation - res.transform.translation).cwiseAbs().maxCoeff() ==
              0.0);
    }
    SUBCASE("never worse than the identity start") {
        double at_identity = ev.evaluate(RigidTransform{}).total;
        CHECK(res.total_score <= at_identity + 1e-12);
    }
    SUBCASE("total equals the weighted per-term sum") {
        double total = 0.0;
        for (size_t i = 0; i < spec.terms.size(); ++i)
            total += spec.terms[i].weight * res.per_term[i];
        CHECK(std::abs(res.total_score - total) < 1e-9);
    }
}
