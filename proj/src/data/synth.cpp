#include "data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "data/annotate.hpp"

namespace ooaf {

int category_id(const std::string& name) {
    for (size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == name) return static_cast<int>(i);
    throw std::invalid_argument("unknown category: " + name);
}

namespace {

enum class Primitive { SphereSurface, Ball, CylinderSurface };

struct PartSpec {
    int part_id;
    Primitive kind;
    Vec3 extents;  // per-axis half extents
    Vec3 offset;
    double frac;            // share of the object's point budget
    bool side_sensitive;    // x-offset multiplied by the instance side
    bool functional;        // carries the ground-truth contacts
};

struct ObjectSpec {
    std::vector<PartSpec> parts;
};

// Sources carry a mirrored decoy sharing the functional part id; the correct
// side is revealed only by where the target's functional part sits.
void add_source_decoy(ObjectSpec& obj) {
    PartSpec decoy = obj.parts.back();
    decoy.offset.x() = -decoy.offset.x();
    decoy.functional = false;
    obj.parts.push_back(decoy);
}

std::pair<ObjectSpec, ObjectSpec> category_specs(int cat) {
    ObjectSpec src, tgt;
    switch (cat) {
        case 0:  // pour: teapot-like vs bowl-like
            src.parts = {{0, Primitive::SphereSurface, {0.5, 0.5, 0.45}, {0, 0, 0}, 0.5, false, false},
                         {1, Primitive::CylinderSurface, {0.22, 0.07, 0.07}, {0.72, 0, 0.15}, 0.25, true, true}};
            tgt.parts = {{2, Primitive::SphereSurface, {0.5, 0.5, 0.3}, {0, 0, 0}, 0.7, false, false},
                         {3, Primitive::Ball, {0.14, 0.14, 0.08}, {0.6, 0, 0.28}, 0.3, true, true}};
            break;
        case 1:  // hang: mug-like vs mugtree-like
            src.parts = {{4, Primitive::CylinderSurface, {0.3, 0.38, 0.38}, {0, 0, 0}, 0.5, false, false},
                         {5, Primitive::Ball, {0.1, 0.1, 0.16}, {0.55, 0, 0}, 0.25, true, true}};
            tgt.parts = {{6, Primitive::CylinderSurface, {0.55, 0.08, 0.08}, {0, 0, 0}, 0.6, false, false},
                         {7, Primitive::CylinderSurface, {0.16, 0.05, 0.05}, {0.58, 0, 0.2}, 0.4, true, true}};
            break;
        case 2:  // press: hammer-like vs button-like
            src.parts = {{8, Primitive::CylinderSurface, {0.45, 0.06, 0.06}, {0, 0, 0}, 0.5, false, false},
                         {9, Primitive::Ball, {0.15, 0.12, 0.12}, {0.62, 0, 0}, 0.25, true, true}};
            tgt.parts = {{10, Primitive::Ball, {0.45, 0.45, 0.1}, {0, 0, 0}, 0.7, false, false},
                         {11, Primitive::Ball, {0.09, 0.09, 0.06}, {0.5, 0, 0.14}, 0.3, true, true}};
            break;
        case 3:  // insert: toast-like vs toaster-like
            src.parts = {{12, Primitive::Ball, {0.32, 0.3, 0.06}, {0, 0, 0}, 0.5, false, false},
                         {13, Primitive::CylinderSurface, {0.28, 0.05, 0.05}, {0.62, 0, 0}, 0.25, true, true}};
            tgt.parts = {{14, Primitive::Ball, {0.45, 0.3, 0.25}, {0, 0, 0}, 0.6, false, false},
                         {15, Primitive::CylinderSurface, {0.2, 0.06, 0.06}, {0.55, 0, 0.2}, 0.4, true, true}};
            break;
        case 4:  // cut: knife-like vs fruit-like
            src.parts = {{16, Primitive::CylinderSurface, {0.25, 0.05, 0.05}, {0, 0, 0}, 0.5, false, false},
                         {17, Primitive::Ball, {0.32, 0.03, 0.12}, {0.62, 0, 0}, 0.25, true, true}};
            tgt.parts = {{18, Primitive::SphereSurface, {0.42, 0.42, 0.42}, {0, 0, 0}, 0.7, false, false},
                         {19, Primitive::Ball, {0.1, 0.1, 0.07}, {0.48, 0, 0.3}, 0.3, true, true}};
            break;
        default:
            throw std::invalid_argument("unknown category id");
    }
    add_source_decoy(src);
    return {src, tgt};
}

// Canonical unit-scale samples; the seed depends only on (category, role, slot)
// so instance seeds never change the sampling pattern.
MatX canonical_samples(Primitive kind, int count, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    MatX pts(count, 3);
    for (int i = 0; i < count; ++i) {
        Vec3 p;
        switch (kind) {
            case Primitive::SphereSurface: {
                do p = {uni(rng), uni(rng), uni(rng)};
                while (p.squaredNorm() < 1e-8 || p.squaredNorm() > 1.0);
                p.normalize();
                break;
            }
            case Primitive::Ball: {
                do p = {uni(rng), uni(rng), uni(rng)};
                while (p.squaredNorm() > 1.0);
                break;
            }
            case Primitive::CylinderSurface: {
                double ang = M_PI * uni(rng);
                p = {uni(rng), std::cos(ang), std::sin(ang)};
                break;
            }
        }
        pts.row(i) = p.transpose();
    }
    return pts;
}

struct BuiltObject {
    FeatureCloud cloud;
    std::vector<Vec3> contacts;
};

BuiltObject build_object(const ObjectSpec& spec, int cat, int role, int n_points, double side,
                         double perturbation, std::mt19937_64& jitter_rng, int n_contacts,
                         int n_channels) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    BuiltObject out;
    out.cloud.points.resize(n_points, 3);
    out.cloud.features.resize(n_points, 0);
    out.cloud.affordance = MatX::Zero(n_points, n_channels);
    out.cloud.part_labels.resize(static_cast<size_t>(n_points));

    // budget per part, remainder to the last
    std::vector<int> counts;
    int used = 0;
    for (size_t s = 0; s < spec.parts.size(); ++s) {
        int c = (s + 1 == spec.parts.size())
                    ? n_points - used
                    : static_cast<int>(std::lround(spec.parts[s].frac * n_points));
        counts.push_back(c);
        used += c;
    }
    // normalize budget if rounding overflowed
    if (used != n_points) counts.back() += n_points - used;

    int row = 0;
    for (size_t s = 0; s < spec.parts.size(); ++s) {
        const PartSpec& part = spec.parts[s];
        Vec3 ext = part.extents;
        Vec3 off = part.offset;
        if (perturbation > 0.0) {
            for (int a = 0; a < 3; ++a) ext[a] *= 1.0 + perturbation * uni(jitter_rng);
            for (int a = 0; a < 3; ++a) off[a] += 0.2 * perturbation * uni(jitter_rng);
        }
        if (part.side_sensitive) off.x() *= side;
        uint64_t canon_seed = 0x9e3779b97f4a7c15ull ^ (static_cast<uint64_t>(cat) << 32) ^
                              (static_cast<uint64_t>(role) << 16) ^ s;
        MatX canon = canonical_samples(part.kind, counts[s], canon_seed);
        for (int i = 0; i < counts[s]; ++i) {
            Vec3 p = canon.row(i).transpose().cwiseProduct(ext) + off;
            out.cloud.points.row(row) = p.transpose();
            out.cloud.part_labels[static_cast<size_t>(row)] = part.part_id;
            if (part.functional && out.contacts.size() < static_cast<size_t>(n_contacts) &&
                i % std::max(1, counts[s] / n_contacts) == 0)
                out.contacts.push_back(p);
            ++row;
        }
    }
    return out;
}

}  // namespace

ObjectPair generate_pair(const std::string& category, uint64_t instance_seed, double perturbation,
                         const SynthOptions& opt) {
    if (perturbation < 0.0 || perturbation > 0.5)
        throw std::invalid_argument("perturbation must lie in [0, 0.5]");
    if (opt.n_points < 8) throw std::invalid_argument("n_points too small");
    const int cat = category_id(category);
    if (cat >= opt.n_channels) throw std::invalid_argument("n_channels too small for category");
    auto [src_spec, tgt_spec] = category_specs(cat);

    std::mt19937_64 jitter_rng(0x51a3c2f9d4e88b71ull ^ (static_cast<uint64_t>(cat) << 40) ^
                               instance_seed);
    double side = 1.0;
    if (perturbation > 0.0) side = (jitter_rng() & 1u) ? 1.0 : -1.0;

    BuiltObject src = build_object(src_spec, cat, 0, opt.n_points, side, perturbation, jitter_rng,
                                   opt.n_contacts, opt.n_channels);
    BuiltObject tgt = build_object(tgt_spec, cat, 1, opt.n_points, side, perturbation, jitter_rng,
                                   opt.n_contacts, opt.n_channels);

    ObjectPair pair;
    pair.category = {cat, kCategoryNames[static_cast<size_t>(cat)]};
    pair.source = propagate_labels(src.cloud, {src.contacts, opt.label_sigma}, cat);
    pair.target = propagate_labels(tgt.cloud, {tgt.contacts, opt.label_sigma}, cat);
    return pair;
}

namespace {

// One unit vector per part id, drawn once; redrawn until pairwise |cos| < 0.3
// for feature_dim >= 256.
std::vector<VecX> part_vectors(int max_part_id, int feature_dim, uint64_t feature_seed) {
    std::mt19937_64 rng(feature_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int count = max_part_id + 1;
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<VecX> vecs;
        vecs.reserve(static_cast<size_t>(count));
        for (int p = 0; p < count; ++p) {
            VecX v(feature_dim);
            for (int d = 0; d < feature_dim; ++d) v[d] = gauss(rng);
            vecs.push_back(v.normalized());
        }
        if (feature_dim < 256) return vecs;
        bool ok = true;
        for (int a = 0; a < count && ok; ++a)
            for (int b = a + 1; b < count && ok; ++b)
                if (std::abs(vecs[static_cast<size_t>(a)].dot(vecs[static_cast<size_t>(b)])) >= 0.3)
                    ok = false;
        if (ok) return vecs;
    }
    throw std::runtime_error("could not draw well-separated part vectors");
}

}  // namespace

FeatureCloud synth_features(const FeatureCloud& cloud, int feature_dim, uint64_t feature_seed,
                            double noise, FeatureMode mode) {
    if (!cloud.has_parts()) throw std::invalid_argument("missing part labels");
    FeatureCloud out = cloud;
    out.features = MatX::Zero(cloud.size(), feature_dim);
    if (mode == FeatureMode::none) return out;
    int max_id = *std::max_element(cloud.part_labels.begin(), cloud.part_labels.end());
    auto vecs = part_vectors(std::max(max_id, 19), feature_dim, feature_seed);
    std::mt19937_64 rng(feature_seed ^ 0xa02bdbf7bb3c0a7ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        out.features.row(i) = vecs[static_cast<size_t>(cloud.part_labels[static_cast<size_t>(i)])];
        if (noise > 0.0)
            for (Eigen::Index d = 0; d < feature_dim; ++d) out.features(i, d) += noise * gauss(rng);
    }
    return out;
}

ObjectPair synth_features(const ObjectPair& pair, int feature_dim, uint64_t feature_seed,
                          double noise, FeatureMode mode) {
    ObjectPair out = pair;
    out.source = synth_features(pair.source, feature_dim, feature_seed, noise, mode);
    out.target = synth_features(pair.target, feature_dim, feature_seed ^ 0x6a09e667f3bcc909ull,
                                noise, mode);
    return out;
}

FeatureCloud apply_occlusion(const FeatureCloud& cloud, double level, uint64_t seed) {
    if (level < 0.05 || level > 0.6) throw std::invalid_argument("occlusion level out of [0.05, 0.6]");
    const Eigen::Index n = cloud.size();
    std::mt19937_64 rng(seed);
    Vec3 center = cloud.points.row(static_cast<Eigen::Index>(rng() % static_cast<uint64_t>(n)))
                      .transpose();
    VecX dist = (cloud.points.rowwise() - center.transpose()).rowwise().norm();
    double lo = 0.0, hi = 2.0 * dist.maxCoeff();
    double radius = -1.0;
    std::vector<char> removed(static_cast<size_t>(n), 0);
    for (int iter = 0; iter < 60; ++iter) {
        double r = 0.5 * (lo + hi);
        Eigen::Index cut = 0;
        for (Eigen::Index i = 0; i < n; ++i) cut += dist[i] <= r ? 1 : 0;
        double frac = static_cast<double>(cut) / static_cast<double>(n);
        if (frac >= level - 0.02 && frac <= level + 0.02 && cut < n) {
            radius = r;
            break;
        }
        (frac < level) ? lo = r : hi = r;
    }
    if (radius < 0.0) throw std::runtime_error("occlusion infeasible");

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (dist[i] > radius) keep.push_back(i);
    FeatureCloud out;
    out.points.resize(static_cast<Eigen::Index>(keep.size()), 3);
    out.features.resize(static_cast<Eigen::Index>(keep.size()), cloud.feature_dim());
    out.affordance.resize(static_cast<Eigen::Index>(keep.size()), cloud.channels());
    if (cloud.has_parts()) out.part_labels.resize(keep.size());
    for (size_t j = 0; j < keep.size(); ++j) {
        auto i = keep[j];
        out.points.row(static_cast<Eigen::Index>(j)) = cloud.points.row(i);
        out.features.row(static_cast<Eigen::Index>(j)) = cloud.features.row(i);
        out.affordance.row(static_cast<Eigen::Index>(j)) = cloud.affordance.row(i);
        if (cloud.has_parts()) out.part_labels[j] = cloud.part_labels[static_cast<size_t>(i)];
    }
    return out;
}

}  // namespace ooaf
