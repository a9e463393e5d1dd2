#include "ooaf/ooaf.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include <json.hpp>

#include "core/cloud_io.hpp"
#include "core/se3.hpp"
#include "core/types.hpp"
#include "data/annotate.hpp"
#include "data/manifest.hpp"
#include "data/synth.hpp"
#include "fusion/fusion.hpp"
#include "metrics/metrics.hpp"
#include "model/checkpoint.hpp"
#include "model/train.hpp"
#include "planner/solve.hpp"
#include "planner/spec.hpp"

struct ooaf_cloud {
    ooaf::FeatureCloud c;
};
struct ooaf_model {
    ooaf::Net<float> net;
};
struct ooaf_spec {
    ooaf::ConstraintSpec s;
};

namespace {

thread_local std::string g_last_error;

ooaf_status classify_runtime(const std::string& msg) {
    if (msg.find("cannot open") != std::string::npos ||
        msg.find("cannot write") != std::string::npos)
        return OOAF_ERR_IO;
    if (msg.find("line ") != std::string::npos || msg.find("header") != std::string::npos)
        return OOAF_ERR_PARSE;
    if (msg.find("non-finite") != std::string::npos || msg.find("undefined") != std::string::npos)
        return OOAF_ERR_NUMERIC;
    return OOAF_ERR_UNKNOWN;
}

ooaf_status fail(ooaf_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

template <typename F>
ooaf_status guarded(F&& fn) {
    try {
        fn();
        return OOAF_OK;
    } catch (const nlohmann::json::exception& e) {
        return fail(OOAF_ERR_PARSE, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(OOAF_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::runtime_error& e) {
        return fail(classify_runtime(e.what()), e.what());
    } catch (const std::exception& e) {
        return fail(OOAF_ERR_UNKNOWN, e.what());
    }
}

ooaf_status require(bool cond, const char* what) {
    if (!cond) return fail(OOAF_ERR_INVALID_ARGUMENT, what);
    return OOAF_OK;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ooaf::RigidTransform make_transform(const double* rotation, const double* translation) {
    ooaf::RigidTransform t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = rotation[3 * r + c];
    for (int i = 0; i < 3; ++i) t.translation[i] = translation[i];
    t.validate();
    return t;
}

ooaf::ModelConfig config_from_cstr(const char* config_json) {
    if (config_json == nullptr) return ooaf::ModelConfig{};
    return ooaf::ModelConfig::from_json(nlohmann::json::parse(config_json));
}

ooaf::FeatureMode feature_mode_from_int(int mode) {
    if (mode == 0) return ooaf::FeatureMode::parts;
    if (mode == 1) return ooaf::FeatureMode::none;
    throw std::invalid_argument("feature_mode must be 0 (parts) or 1 (none)");
}

}  // namespace

extern "C" {

const char* ooaf_last_error(void) { return g_last_error.c_str(); }

void ooaf_string_free(char* s) { std::free(s); }

/* ---------- clouds ---------- */

ooaf_status ooaf_cloud_load(const char* path, ooaf_cloud** out) {
    if (auto st = require(path && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_cloud{ooaf::load_cloud(path)}; });
}

ooaf_status ooaf_cloud_save(const ooaf_cloud* cloud, const char* path) {
    if (auto st = require(cloud && path, "null argument")) return st;
    return guarded([&] { ooaf::save_cloud(cloud->c, path); });
}

ooaf_status ooaf_cloud_create(int64_t n_points, int64_t n_features, int64_t n_channels,
                              const double* points, const double* features,
                              const double* affordance, const int32_t* parts, ooaf_cloud** out) {
    if (auto st = require(points && out, "null argument")) return st;
    if (auto st = require(n_features == 0 || features, "features pointer required")) return st;
    if (auto st = require(n_channels == 0 || affordance, "affordance pointer required")) return st;
    return guarded([&] {
        ooaf::FeatureCloud c;
        c.points.resize(n_points, 3);
        for (int64_t i = 0; i < n_points; ++i)
            for (int64_t j = 0; j < 3; ++j) c.points(i, j) = points[3 * i + j];
        c.features.resize(n_points, n_features);
        for (int64_t i = 0; i < n_points; ++i)
            for (int64_t j = 0; j < n_features; ++j) c.features(i, j) = features[n_features * i + j];
        c.affordance.resize(n_points, n_channels);
        for (int64_t i = 0; i < n_points; ++i)
            for (int64_t j = 0; j < n_channels; ++j)
                c.affordance(i, j) = affordance[n_channels * i + j];
        if (parts) c.part_labels.assign(parts, parts + n_points);
        c.validate();
        *out = new ooaf_cloud{std::move(c)};
    });
}

void ooaf_cloud_free(ooaf_cloud* cloud) { delete cloud; }

int64_t ooaf_cloud_size(const ooaf_cloud* cloud) { return cloud ? cloud->c.size() : 0; }
int64_t ooaf_cloud_feature_dim(const ooaf_cloud* cloud) {
    return cloud ? cloud->c.feature_dim() : 0;
}
int64_t ooaf_cloud_channels(const ooaf_cloud* cloud) { return cloud ? cloud->c.channels() : 0; }
int ooaf_cloud_has_parts(const ooaf_cloud* cloud) {
    return cloud && cloud->c.has_parts() ? 1 : 0;
}

ooaf_status ooaf_cloud_points(const ooaf_cloud* cloud, double* out) {
    if (auto st = require(cloud && out, "null argument")) return st;
    for (Eigen::Index i = 0; i < cloud->c.size(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) out[3 * i + j] = cloud->c.points(i, j);
    return OOAF_OK;
}

ooaf_status ooaf_cloud_features(const ooaf_cloud* cloud, double* out) {
    if (auto st = require(cloud && out, "null argument")) return st;
    const auto n = cloud->c.feature_dim();
    for (Eigen::Index i = 0; i < cloud->c.size(); ++i)
        for (Eigen::Index j = 0; j < n; ++j) out[n * i + j] = cloud->c.features(i, j);
    return OOAF_OK;
}

ooaf_status ooaf_cloud_affordance(const ooaf_cloud* cloud, double* out) {
    if (auto st = require(cloud && out, "null argument")) return st;
    const auto k = cloud->c.channels();
    for (Eigen::Index i = 0; i < cloud->c.size(); ++i)
        for (Eigen::Index j = 0; j < k; ++j) out[k * i + j] = cloud->c.affordance(i, j);
    return OOAF_OK;
}

ooaf_status ooaf_cloud_parts(const ooaf_cloud* cloud, int32_t* out) {
    if (auto st = require(cloud && out, "null argument")) return st;
    if (auto st = require(cloud->c.has_parts(), "cloud has no part labels")) return st;
    for (size_t i = 0; i < cloud->c.part_labels.size(); ++i)
        out[i] = cloud->c.part_labels[i];
    return OOAF_OK;
}

ooaf_status ooaf_se3_apply(const double* rotation, const double* translation,
                           const ooaf_cloud* cloud, ooaf_cloud** out) {
    if (auto st = require(rotation && translation && cloud && out, "null argument")) return st;
    return guarded([&] {
        *out = new ooaf_cloud{ooaf::se3_apply(make_transform(rotation, translation), cloud->c)};
    });
}

/* ---------- synthetic data ---------- */

ooaf_status ooaf_generate_pair(const char* category, uint64_t instance_seed, double perturbation,
                               int n_points, int feature_dim, uint64_t feature_seed,
                               double feature_noise, int feature_mode, ooaf_cloud** src,
                               ooaf_cloud** tgt) {
    if (auto st = require(category && src && tgt, "null argument")) return st;
    return guarded([&] {
        ooaf::SynthOptions opt;
        opt.n_points = n_points;
        ooaf::ObjectPair pair = ooaf::generate_pair(category, instance_seed, perturbation, opt);
        if (feature_dim > 0)
            pair = ooaf::synth_features(pair, feature_dim, feature_seed, feature_noise,
                                        feature_mode_from_int(feature_mode));
        *src = new ooaf_cloud{std::move(pair.source)};
        *tgt = new ooaf_cloud{std::move(pair.target)};
    });
}

ooaf_status ooaf_write_dataset(const char* root_dir, int n_eval, double perturbation,
                               uint64_t base_seed, uint64_t feature_seed, int feature_dim,
                               double feature_noise, int feature_mode, int n_points) {
    if (auto st = require(root_dir != nullptr, "null argument")) return st;
    return guarded([&] {
        ooaf::DatasetGenOptions opt;
        opt.n_eval = n_eval;
        opt.perturbation = perturbation;
        opt.base_seed = base_seed;
        opt.feature_seed = feature_seed;
        opt.feature_dim = feature_dim;
        opt.feature_noise = feature_noise;
        opt.feature_mode = feature_mode_from_int(feature_mode);
        opt.synth.n_points = n_points;
        ooaf::write_dataset(root_dir, opt);
    });
}

ooaf_status ooaf_propagate_labels(const ooaf_cloud* cloud, int channel, const double* contacts,
                                  int n_contacts, double sigma, ooaf_cloud** out) {
    if (auto st = require(cloud && contacts && out, "null argument")) return st;
    return guarded([&] {
        ooaf::ContactAnnotation ann;
        ann.sigma = sigma;
        for (int i = 0; i < n_contacts; ++i)
            ann.contact_points.emplace_back(contacts[3 * i], contacts[3 * i + 1],
                                            contacts[3 * i + 2]);
        *out = new ooaf_cloud{ooaf::propagate_labels(cloud->c, ann, channel)};
    });
}

ooaf_status ooaf_apply_occlusion(const ooaf_cloud* cloud, double level, uint64_t seed,
                                 ooaf_cloud** out) {
    if (auto st = require(cloud && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_cloud{ooaf::apply_occlusion(cloud->c, level, seed)}; });
}

/* ---------- fusion ---------- */

ooaf_status ooaf_fuse(const ooaf_cloud* base_cloud, const char* const* camera_json_paths,
                      int n_cameras, double mu, ooaf_cloud** out, int32_t* coverage_out) {
    if (auto st = require(base_cloud && camera_json_paths && out, "null argument")) return st;
    if (auto st = require(n_cameras >= 1, "need at least one camera")) return st;
    return guarded([&] {
        std::vector<ooaf::CameraView> views;
        for (int i = 0; i < n_cameras; ++i) views.push_back(ooaf::load_camera(camera_json_paths[i]));
        ooaf::FusedCloud fused = ooaf::fuse_cloud(base_cloud->c.points, views, mu);
        if (coverage_out)
            for (size_t i = 0; i < fused.coverage.size(); ++i) coverage_out[i] = fused.coverage[i];
        *out = new ooaf_cloud{std::move(fused.cloud)};
    });
}

/* ---------- model ---------- */

ooaf_status ooaf_train(const char* dataset_root, const char* config_json, uint64_t seed,
                       ooaf_model** out, double** loss_history, int64_t* loss_len) {
    if (auto st = require(dataset_root && out, "null argument")) return st;
    return guarded([&] {
        ooaf::ModelConfig cfg = config_from_cstr(config_json);
        cfg.seed = seed;
        ooaf::DatasetManifest manifest = ooaf::build_manifest(dataset_root);
        ooaf::TrainResult result = ooaf::train_one_shot(manifest, cfg);
        if (loss_history && loss_len) {
            *loss_len = static_cast<int64_t>(result.loss_history.size());
            *loss_history =
                static_cast<double*>(std::malloc(result.loss_history.size() * sizeof(double)));
            std::memcpy(*loss_history, result.loss_history.data(),
                        result.loss_history.size() * sizeof(double));
        }
        *out = new ooaf_model{std::move(result.net)};
    });
}

void ooaf_loss_history_free(double* history) { std::free(history); }

ooaf_status ooaf_model_save(const ooaf_model* model, const char* path) {
    if (auto st = require(model && path, "null argument")) return st;
    return guarded([&] { ooaf::save_checkpoint(model->net, path); });
}

ooaf_status ooaf_model_load(const char* path, ooaf_model** out) {
    if (auto st = require(path && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_model{ooaf::load_checkpoint(path)}; });
}

void ooaf_model_free(ooaf_model* model) { delete model; }

ooaf_status ooaf_model_config_json(const ooaf_model* model, char** out) {
    if (auto st = require(model && out, "null argument")) return st;
    return guarded([&] { *out = dup_string(model->net.cfg.to_json().dump()); });
}

ooaf_status ooaf_predict(const ooaf_model* model, const ooaf_cloud* src, const ooaf_cloud* tgt,
                         ooaf_cloud** src_pred, ooaf_cloud** tgt_pred) {
    if (auto st = require(model && src && tgt && src_pred && tgt_pred, "null argument")) return st;
    return guarded([&] {
        ooaf::ObjectPair pair;
        pair.source = src->c;
        pair.target = tgt->c;
        auto [map_src, map_tgt] = ooaf::predict(model->net, pair);
        ooaf::FeatureCloud out_src = src->c;
        ooaf::FeatureCloud out_tgt = tgt->c;
        out_src.affordance = map_src;
        out_tgt.affordance = map_tgt;
        *src_pred = new ooaf_cloud{std::move(out_src)};
        *tgt_pred = new ooaf_cloud{std::move(out_tgt)};
    });
}

ooaf_status ooaf_grad_check(const char* config_json, double* max_rel_error, char** report_json) {
    if (auto st = require(max_rel_error != nullptr, "null argument")) return st;
    return guarded([&] {
        ooaf::ModelConfig cfg = config_json ? ooaf::ModelConfig::from_json(
                                                  nlohmann::json::parse(config_json))
                                            : ooaf::ModelConfig::small();
        ooaf::GradCheckReport report = ooaf::grad_check(cfg);
        *max_rel_error = report.max_rel_error;
        if (report_json) {
            nlohmann::json j = {{"max_rel_error", report.max_rel_error},
                                {"tensors", nlohmann::json::array()}};
            for (const auto& [name, err] : report.per_tensor)
                j["tensors"].push_back({{"name", name}, {"rel_error", err}});
            *report_json = dup_string(j.dump(2));
        }
    });
}

ooaf_status ooaf_dump_embeddings(const ooaf_model* model, const char* dataset_root,
                                 const char* path) {
    if (auto st = require(model && dataset_root && path, "null argument")) return st;
    return guarded([&] {
        ooaf::DatasetManifest manifest = ooaf::build_manifest(dataset_root);
        std::vector<ooaf::ObjectPair> pairs;
        for (const auto& cs : manifest.categories) pairs.push_back(ooaf::load_sample(cs.train));
        ooaf::dump_patch_embeddings(model->net, pairs, path);
    });
}

/* ---------- metrics ---------- */

namespace {

ooaf_status metric_guard(const double* pred, const double* gt, int64_t n, double* out,
                         double (*fn)(const ooaf::VecX&, const ooaf::VecX&)) {
    if (auto st = require(pred && gt && out, "null argument")) return st;
    return guarded([&] {
        ooaf::VecX p = Eigen::Map<const ooaf::VecX>(pred, n);
        ooaf::VecX g = Eigen::Map<const ooaf::VecX>(gt, n);
        *out = fn(p, g);
    });
}

}  // namespace

ooaf_status ooaf_metric_aiou(const double* pred, const double* gt, int64_t n, double* out) {
    return metric_guard(pred, gt, n, out, &ooaf::aiou);
}
ooaf_status ooaf_metric_sim(const double* pred, const double* gt, int64_t n, double* out) {
    return metric_guard(pred, gt, n, out, &ooaf::sim);
}
ooaf_status ooaf_metric_mae(const double* pred, const double* gt, int64_t n, double* out) {
    return metric_guard(pred, gt, n, out, &ooaf::mae);
}
ooaf_status ooaf_metric_auc(const double* pred, const double* gt, int64_t n, double* out) {
    return metric_guard(pred, gt, n, out, &ooaf::auc);
}

ooaf_status ooaf_evaluate(const ooaf_model* model, const char* dataset_root,
                          double occlusion_level, uint64_t occlusion_seed, double* aiou,
                          double* sim, double* mae, double* auc, char** report_json,
                          char** report_table) {
    if (auto st = require(model && dataset_root, "null argument")) return st;
    return guarded([&] {
        ooaf::DatasetManifest manifest = ooaf::build_manifest(dataset_root);
        ooaf::EvalOptions options;
        options.occlusion_level = occlusion_level;
        options.occlusion_seed = occlusion_seed;
        ooaf::MetricReport report = ooaf::evaluate(manifest, model->net, options);
        if (aiou) *aiou = report.aiou;
        if (sim) *sim = report.sim;
        if (mae) *mae = report.mae;
        if (auc) *auc = report.auc;
        if (report_json) *report_json = dup_string(ooaf::report_to_json(report));
        if (report_table) *report_table = dup_string(ooaf::report_to_table(report));
    });
}

/* ---------- planner ---------- */

ooaf_status ooaf_spec_load(const char* path, ooaf_spec** out) {
    if (auto st = require(path && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_spec{ooaf::load_spec(path)}; });
}

ooaf_status ooaf_spec_parse(const char* json_text, ooaf_spec** out) {
    if (auto st = require(json_text && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_spec{ooaf::parse_spec(json_text)}; });
}

ooaf_status ooaf_spec_builtin(const char* task, ooaf_spec** out) {
    if (auto st = require(task && out, "null argument")) return st;
    return guarded([&] { *out = new ooaf_spec{ooaf::builtin_spec(task)}; });
}

ooaf_status ooaf_spec_to_json(const ooaf_spec* spec, char** out) {
    if (auto st = require(spec && out, "null argument")) return st;
    return guarded([&] { *out = dup_string(ooaf::spec_to_json(spec->s)); });
}

int ooaf_spec_num_terms(const ooaf_spec* spec) {
    return spec ? static_cast<int>(spec->s.terms.size()) : 0;
}

void ooaf_spec_free(ooaf_spec* spec) { delete spec; }

ooaf_status ooaf_objective(const ooaf_spec* spec, const ooaf_cloud* src, const ooaf_cloud* tgt,
                           int channel, const double* rotation, const double* translation,
                           double* total, double* per_term) {
    if (auto st = require(spec && src && tgt && rotation && translation && total, "null argument"))
        return st;
    return guarded([&] {
        ooaf::ObjectiveResult result = ooaf::objective(spec->s, src->c, tgt->c, channel,
                                                       make_transform(rotation, translation));
        *total = result.total;
        if (per_term)
            for (size_t i = 0; i < result.per_term.size(); ++i) per_term[i] = result.per_term[i];
    });
}

ooaf_status ooaf_solve(const ooaf_spec* spec, const ooaf_cloud* src, const ooaf_cloud* tgt,
                       int channel, int restarts, int max_iters, uint64_t seed,
                       double* rotation_out, double* translation_out, double* total_score,
                       double* per_term, int* best_restart) {
    if (auto st = require(spec && src && tgt && rotation_out && translation_out && total_score,
                          "null argument"))
        return st;
    return guarded([&] {
        ooaf::SolveOptions options;
        options.restarts = restarts;
        options.max_iters = max_iters;
        options.seed = seed;
        ooaf::OptimizationResult result =
            ooaf::solve(spec->s, src->c, tgt->c, channel, options);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rotation_out[3 * r + c] = result.transform.rotation(r, c);
        for (int i = 0; i < 3; ++i) translation_out[i] = result.transform.translation[i];
        *total_score = result.total_score;
        if (per_term)
            for (size_t i = 0; i < result.per_term.size(); ++i) per_term[i] = result.per_term[i];
        if (best_restart) *best_restart = result.best_restart_index;
    });
}

}  // extern "C"
