#include "model/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "core/se3.hpp"

namespace ooaf {

double bce_loss(const VecX& pred, const VecX& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("bce_loss: length mismatch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        double p = std::clamp(pred[i], 1e-7, 1.0 - 1e-7);
        loss -= gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p);
    }
    return loss / static_cast<double>(pred.size());
}

namespace {

struct Adam {
    NetParams<float> m, v;
    long step = 0;

    explicit Adam(const ModelConfig& cfg)
        : m(allocate_params<float>(cfg)), v(allocate_params<float>(cfg)) {}

    void update(NetParams<float>& params, NetParams<float>& grads, const ModelConfig& cfg) {
        ++step;
        const auto b1 = static_cast<float>(cfg.adam_beta1);
        const auto b2 = static_cast<float>(cfg.adam_beta2);
        const auto eps = static_cast<float>(cfg.adam_eps);
        const auto lr = static_cast<float>(cfg.learning_rate);
        const float corr1 = 1.0f - std::pow(b1, static_cast<float>(step));
        const float corr2 = 1.0f - std::pow(b2, static_cast<float>(step));
        std::vector<MatT<float>*> ps, gs, ms, vs;
        visit_params(params, [&](const std::string&, MatT<float>& t) { ps.push_back(&t); });
        visit_params(grads, [&](const std::string&, MatT<float>& t) { gs.push_back(&t); });
        visit_params(m, [&](const std::string&, MatT<float>& t) { ms.push_back(&t); });
        visit_params(v, [&](const std::string&, MatT<float>& t) { vs.push_back(&t); });
        for (size_t i = 0; i < ps.size(); ++i) {
            *ms[i] = b1 * *ms[i] + (1.0f - b1) * *gs[i];
            *vs[i] = (b2 * vs[i]->array() + (1.0f - b2) * gs[i]->array().square()).matrix();
            auto mhat = ms[i]->array() / corr1;
            auto vhat = vs[i]->array() / corr2;
            ps[i]->array() -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
};

void zero_params(NetParams<float>& g) {
    visit_params(g, [](const std::string&, MatT<float>& t) { t.setZero(); });
}

FeatureCloud augment_cloud(const FeatureCloud& cloud, double angle, double jitter_std,
                           std::mt19937_64& rng) {
    RigidTransform rot;
    rot.rotation = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
    FeatureCloud out = se3_apply(rot, cloud);
    std::normal_distribution<double> gauss(0.0, jitter_std);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        for (int a = 0; a < 3; ++a) out.points(i, a) += gauss(rng);
    return out;
}

struct PreparedPair {
    PreparedObject src, tgt;
    VecT<float> gt_src, gt_tgt;
};

PreparedPair prepare_pair(const ObjectPair& pair, const ModelConfig& cfg) {
    NormalizeRecord rs, rt;
    ObjectPair norm = normalize_pair(pair, rs, rt);
    PreparedPair pp;
    pp.src = prepare_object(norm.source, cfg);
    pp.tgt = prepare_object(norm.target, cfg);
    const int ch = pair.category.id;
    pp.gt_src = norm.source.affordance.col(ch).cast<float>();
    pp.gt_tgt = norm.target.affordance.col(ch).cast<float>();
    return pp;
}

}  // namespace

TrainResult train_one_shot(const std::vector<ObjectPair>& train_pairs, const ModelConfig& cfg) {
    cfg.validate();
    if (train_pairs.empty()) throw std::invalid_argument("no training pairs");
    std::vector<ObjectPair> ordered = train_pairs;
    std::sort(ordered.begin(), ordered.end(),
              [](const ObjectPair& a, const ObjectPair& b) { return a.category.id < b.category.id; });
    for (const auto& pair : ordered) {
        if (pair.source.feature_dim() != cfg.feature_dim ||
            pair.target.feature_dim() != cfg.feature_dim)
            throw std::invalid_argument("feature dimension does not match config");
        if (pair.category.id >= cfg.channels)
            throw std::invalid_argument("category id exceeds configured channels");
        if (pair.source.channels() <= pair.category.id || pair.target.channels() <= pair.category.id)
            throw std::invalid_argument("training pair lacks its ground-truth channel");
    }

    TrainResult result;
    result.net = Net<float>(cfg);
    Adam adam(cfg);
    NetParams<float> grads = allocate_params<float>(cfg);
    std::mt19937_64 aug_rng(cfg.seed ^ 0x7f4a7c159e3779b9ull);
    std::mt19937_64 drop_rng(cfg.seed ^ 0x452821e638d01377ull);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);

    // without augmentation the geometry is static, prepare once
    std::vector<PreparedPair> fixed;
    if (!cfg.augment)
        for (const auto& pair : ordered) fixed.push_back(prepare_pair(pair, cfg));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t s = 0; s < ordered.size(); ++s) {
            PreparedPair pp;
            if (cfg.augment) {
                double a = angle(aug_rng);
                ObjectPair aug = ordered[s];
                aug.source = augment_cloud(ordered[s].source, a, cfg.jitter_std, aug_rng);
                aug.target = augment_cloud(ordered[s].target, a, cfg.jitter_std, aug_rng);
                pp = prepare_pair(aug, cfg);
            } else {
                pp = fixed[s];
            }
            const int ch = ordered[s].category.id;
            Forward<float> f = result.net.forward(pp.src, pp.tgt, /*train=*/true, &drop_rng);
            zero_params(grads);
            MatT<float> dlog_s = MatT<float>::Zero(cfg.num_groups, cfg.channels);
            MatT<float> dlog_t = MatT<float>::Zero(cfg.num_groups, cfg.channels);
            float loss = channel_bce_with_logit_grad(f.src.sig, pp.src.assign, ch, pp.gt_src, 0.5f,
                                                     dlog_s) +
                         channel_bce_with_logit_grad(f.tgt.sig, pp.tgt.assign, ch, pp.gt_tgt, 0.5f,
                                                     dlog_t);
            if (!std::isfinite(loss))
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch));
            result.net.backward(f, pp.src, pp.tgt, dlog_s, dlog_t, grads);
            adam.update(result.net.params, grads, cfg);
            result.loss_history.push_back(static_cast<double>(loss));
        }
    }
    return result;
}

TrainResult train_one_shot(const DatasetManifest& manifest, const ModelConfig& cfg) {
    std::vector<ObjectPair> pairs;
    for (const auto& cs : manifest.categories) pairs.push_back(load_sample(cs.train));
    return train_one_shot(pairs, cfg);
}

std::pair<MatX, MatX> predict(const Net<float>& net, const ObjectPair& pair) {
    PreparedPair pp;
    NormalizeRecord rs, rt;
    ObjectPair norm;
    norm.source = normalize_cloud(pair.source, rs);
    norm.target = normalize_cloud(pair.target, rt);
    pp.src = prepare_object(norm.source, net.cfg);
    pp.tgt = prepare_object(norm.target, net.cfg);
    Forward<float> f = net.forward(pp.src, pp.tgt, /*train=*/false);
    return {net.per_point_map(f.src, pp.src).cast<double>(),
            net.per_point_map(f.tgt, pp.tgt).cast<double>()};
}

GradCheckReport grad_check(const ModelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed ^ 0xc0ac29b7c97c50ddull);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);
    auto make_cloud = [&](int n) {
        FeatureCloud c;
        c.points.resize(n, 3);
        c.features.resize(n, cfg.feature_dim);
        c.affordance.resize(n, cfg.channels);
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec3 p;
            do p = {uni(rng), uni(rng), uni(rng)};
            while (p.squaredNorm() > 1.0);
            c.points.row(i) = p.transpose();
            for (int d = 0; d < cfg.feature_dim; ++d) c.features(i, d) = uni(rng);
            for (int k = 0; k < cfg.channels; ++k) c.affordance(i, k) = uni01(rng);
        }
        return c;
    };
    const int n_points = 64;
    Net<double> net(cfg);

    // The max-pool argmax must not flip while finite differences perturb the
    // patch-MLP weights, or the numeric gradient sees the kink instead of the
    // local slope. Resample the fixture until every pooling margin (between
    // distinct candidate values) clears the largest activation shift a +-h
    // weight perturbation can cause.
    auto min_pool_margin = [&](const PreparedObject& po) {
        MatT<double> x = po.patch_rows;
        MatT<double> a1 = (x * net.params.enc1_w).rowwise() + net.params.enc1_b.row(0);
        MatT<double> a2 =
            (gelu_mat<double>(a1) * net.params.enc2_w).rowwise() + net.params.enc2_b.row(0);
        const int k = cfg.group_size;
        double min_margin = std::numeric_limits<double>::infinity();
        for (int t = 0; t < cfg.num_groups; ++t)
            for (int c = 0; c < cfg.token_dim; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                double second = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < k; ++j) {
                    double v = a2(static_cast<Eigen::Index>(t) * k + j, c);
                    if (v > best) {
                        second = best;
                        best = v;
                    } else if (v < best && v > second) {
                        second = v;  // duplicates of the max are harmless ties
                    }
                }
                if (std::isfinite(second)) min_margin = std::min(min_margin, best - second);
            }
        return min_margin;
    };

    FeatureCloud src_cloud, tgt_cloud;
    PreparedObject src, tgt;
    bool found = false;
    for (int attempt = 0; attempt < 2000 && !found; ++attempt) {
        src_cloud = make_cloud(n_points);
        tgt_cloud = make_cloud(n_points);
        src = prepare_object(src_cloud, cfg);
        tgt = prepare_object(tgt_cloud, cfg);
        found = min_pool_margin(src) > 8e-3 && min_pool_margin(tgt) > 8e-3;
    }
    if (!found) throw std::runtime_error("no pooling-stable fixture found");
    VecT<double> gt_src = src_cloud.affordance.col(0);
    VecT<double> gt_tgt = tgt_cloud.affordance.col(0);
    auto loss_of = [&]() {
        Forward<double> f = net.forward(src, tgt, /*train=*/false);
        MatT<double> dummy_s = MatT<double>::Zero(cfg.num_groups, cfg.channels);
        MatT<double> dummy_t = MatT<double>::Zero(cfg.num_groups, cfg.channels);
        return channel_bce_with_logit_grad(f.src.sig, src.assign, 0, gt_src, 0.5, dummy_s) +
               channel_bce_with_logit_grad(f.tgt.sig, tgt.assign, 0, gt_tgt, 0.5, dummy_t);
    };

    NetParams<double> grads = allocate_params<double>(cfg);
    {
        Forward<double> f = net.forward(src, tgt, /*train=*/false);
        MatT<double> dlog_s = MatT<double>::Zero(cfg.num_groups, cfg.channels);
        MatT<double> dlog_t = MatT<double>::Zero(cfg.num_groups, cfg.channels);
        channel_bce_with_logit_grad(f.src.sig, src.assign, 0, gt_src, 0.5, dlog_s);
        channel_bce_with_logit_grad(f.tgt.sig, tgt.assign, 0, gt_tgt, 0.5, dlog_t);
        net.backward(f, src, tgt, dlog_s, dlog_t, grads);
    }

    const double h = 1e-3;
    GradCheckReport report;
    std::vector<std::pair<std::string, MatT<double>*>> tensors, grad_tensors;
    visit_params(net.params,
                 [&](const std::string& name, MatT<double>& t) { tensors.emplace_back(name, &t); });
    visit_params(grads, [&](const std::string& name, MatT<double>& t) {
        grad_tensors.emplace_back(name, &t);
    });
    for (size_t ti = 0; ti < tensors.size(); ++ti) {
        MatT<double>& tensor = *tensors[ti].second;
        MatT<double>& analytic = *grad_tensors[ti].second;
        double max_abs_diff = 0.0, max_mag = 0.0;
        for (Eigen::Index r = 0; r < tensor.rows(); ++r)
            for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
                const double saved = tensor(r, c);
                tensor(r, c) = saved + h;
                double lp = loss_of();
                tensor(r, c) = saved - h;
                double lm = loss_of();
                tensor(r, c) = saved;
                double fd = (lp - lm) / (2.0 * h);
                max_abs_diff = std::max(max_abs_diff, std::abs(fd - analytic(r, c)));
                max_mag = std::max({max_mag, std::abs(fd), std::abs(analytic(r, c))});
            }
        double rel = max_abs_diff / (max_mag + 1e-8);
        report.per_tensor.emplace_back(tensors[ti].first, rel);
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    return report;
}

void dump_patch_embeddings(const Net<float>& net, const std::vector<ObjectPair>& pairs,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(9);
    out << "ooaf-emb 1 " << pairs.size() * 2 * static_cast<size_t>(net.cfg.num_groups) << " "
        << net.cfg.token_dim << "\n";
    for (const auto& pair : pairs) {
        NormalizeRecord rs, rt;
        FeatureCloud src = normalize_cloud(pair.source, rs);
        FeatureCloud tgt = normalize_cloud(pair.target, rt);
        for (int role = 0; role < 2; ++role) {
            const FeatureCloud& cloud = role == 0 ? src : tgt;
            PreparedObject po = prepare_object(cloud, net.cfg);
            MatT<float> z = net.tokenizer_tokens(po, role);
            for (int t = 0; t < net.cfg.num_groups; ++t) {
                for (int d = 0; d < net.cfg.token_dim; ++d) out << z(t, d) << " ";
                int part = cloud.has_parts()
                               ? cloud.part_labels[static_cast<size_t>(po.center_index[static_cast<size_t>(t)])]
                               : -1;
                out << part << " " << pair.category.id << "\n";
            }
        }
    }
}

}  // namespace ooaf
