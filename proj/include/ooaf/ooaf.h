/* C interface to the ooaf library: one-shot object-to-object affordance
 * grounding (synthetic data, multi-view feature fusion, joint cross-attention
 * network, metrics) and constraint-based SE(3) pose optimization.
 *
 * Conventions:
 *  - Every fallible function returns an ooaf_status; OOAF_OK is 0.
 *  - On failure, ooaf_last_error() returns a thread-local message.
 *  - Out-parameters are written only on success.
 *  - Handles are opaque; release them with the matching *_free function.
 *  - Strings returned through char** are heap-allocated; release with
 *    ooaf_string_free.
 *  - Matrices passed through double* are row-major.
 */
#ifndef OOAF_H
#define OOAF_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ooaf_status {
    OOAF_OK = 0,
    OOAF_ERR_INVALID_ARGUMENT = 1,
    OOAF_ERR_IO = 2,
    OOAF_ERR_PARSE = 3,
    OOAF_ERR_NUMERIC = 4,
    OOAF_ERR_UNKNOWN = 5,
} ooaf_status;

typedef struct ooaf_cloud ooaf_cloud;  /* point cloud + features + affordance */
typedef struct ooaf_model ooaf_model;  /* trained network */
typedef struct ooaf_spec ooaf_spec;    /* constraint specification */

/* Message describing the most recent failure on this thread. */
const char* ooaf_last_error(void);

void ooaf_string_free(char* s);

/* ---------- clouds ---------- */

ooaf_status ooaf_cloud_load(const char* path, ooaf_cloud** out);
ooaf_status ooaf_cloud_save(const ooaf_cloud* cloud, const char* path);

/* features/affordance/parts may be NULL (then n_features/n_channels must be 0
 * and parts are absent). */
ooaf_status ooaf_cloud_create(int64_t n_points, int64_t n_features, int64_t n_channels,
                              const double* points, const double* features,
                              const double* affordance, const int32_t* parts, ooaf_cloud** out);
void ooaf_cloud_free(ooaf_cloud* cloud);

int64_t ooaf_cloud_size(const ooaf_cloud* cloud);
int64_t ooaf_cloud_feature_dim(const ooaf_cloud* cloud);
int64_t ooaf_cloud_channels(const ooaf_cloud* cloud);
int ooaf_cloud_has_parts(const ooaf_cloud* cloud);

/* Copies into caller buffers sized N*3, N*n, N*K, N respectively. */
ooaf_status ooaf_cloud_points(const ooaf_cloud* cloud, double* out);
ooaf_status ooaf_cloud_features(const ooaf_cloud* cloud, double* out);
ooaf_status ooaf_cloud_affordance(const ooaf_cloud* cloud, double* out);
ooaf_status ooaf_cloud_parts(const ooaf_cloud* cloud, int32_t* out);

/* x -> R x + t applied to every point (R row-major 3x3). */
ooaf_status ooaf_se3_apply(const double* rotation, const double* translation,
                           const ooaf_cloud* cloud, ooaf_cloud** out);

/* ---------- synthetic data ---------- */

/* category: pour|hang|press|insert|cut. Affordance channels are ground truth;
 * features are part-consistent stand-ins (feature_mode 0) or all-zero
 * (feature_mode 1). */
ooaf_status ooaf_generate_pair(const char* category, uint64_t instance_seed, double perturbation,
                               int n_points, int feature_dim, uint64_t feature_seed,
                               double feature_noise, int feature_mode, ooaf_cloud** src,
                               ooaf_cloud** tgt);

/* Writes the full one-shot dataset layout under root_dir. */
ooaf_status ooaf_write_dataset(const char* root_dir, int n_eval, double perturbation,
                               uint64_t base_seed, uint64_t feature_seed, int feature_dim,
                               double feature_noise, int feature_mode, int n_points);

/* contacts: n_contacts x 3 row-major points that must coincide with cloud
 * points. Writes exp(-d^2/(2 sigma^2)) into the given channel. */
ooaf_status ooaf_propagate_labels(const ooaf_cloud* cloud, int channel, const double* contacts,
                                  int n_contacts, double sigma, ooaf_cloud** out);

/* level in [0.05, 0.6]: fraction of points removed by a spherical occluder. */
ooaf_status ooaf_apply_occlusion(const ooaf_cloud* cloud, double level, uint64_t seed,
                                 ooaf_cloud** out);

/* ---------- fusion ---------- */

/* Fuses per-view feature maps onto the points of base_cloud. Each camera path
 * names a camera-description JSON with depth/feature sidecar files. */
ooaf_status ooaf_fuse(const ooaf_cloud* base_cloud, const char* const* camera_json_paths,
                      int n_cameras, double mu, ooaf_cloud** out, int32_t* coverage_out);

/* ---------- model ---------- */

/* config_json: serialized model configuration, or NULL for defaults.
 * Missing keys keep their default values. */
ooaf_status ooaf_train(const char* dataset_root, const char* config_json, uint64_t seed,
                       ooaf_model** out, double** loss_history, int64_t* loss_len);

ooaf_status ooaf_model_save(const ooaf_model* model, const char* path);
ooaf_status ooaf_model_load(const char* path, ooaf_model** out);
void ooaf_model_free(ooaf_model* model);
ooaf_status ooaf_model_config_json(const ooaf_model* model, char** out);

void ooaf_loss_history_free(double* history);

/* Predicted clouds carry the model's full K-channel affordance maps in place
 * of any input labels; points and features pass through unchanged. */
ooaf_status ooaf_predict(const ooaf_model* model, const ooaf_cloud* src, const ooaf_cloud* tgt,
                         ooaf_cloud** src_pred, ooaf_cloud** tgt_pred);

/* Finite-difference gradient verification on the given (or small default)
 * configuration; report_json lists per-tensor relative errors. */
ooaf_status ooaf_grad_check(const char* config_json, double* max_rel_error, char** report_json);

/* Writes tokenizer embeddings for every sample of the dataset. */
ooaf_status ooaf_dump_embeddings(const ooaf_model* model, const char* dataset_root,
                                 const char* path);

/* ---------- metrics ---------- */

ooaf_status ooaf_metric_aiou(const double* pred, const double* gt, int64_t n, double* out);
ooaf_status ooaf_metric_sim(const double* pred, const double* gt, int64_t n, double* out);
ooaf_status ooaf_metric_mae(const double* pred, const double* gt, int64_t n, double* out);
ooaf_status ooaf_metric_auc(const double* pred, const double* gt, int64_t n, double* out);

/* Evaluates the model on the dataset's eval split. occlusion_level < 0
 * disables occlusion. Outputs (each nullable): macro means and a JSON /
 * plain-text report. */
ooaf_status ooaf_evaluate(const ooaf_model* model, const char* dataset_root,
                          double occlusion_level, uint64_t occlusion_seed, double* aiou,
                          double* sim, double* mae, double* auc, char** report_json,
                          char** report_table);

/* ---------- planner ---------- */

ooaf_status ooaf_spec_load(const char* path, ooaf_spec** out);
ooaf_status ooaf_spec_parse(const char* json_text, ooaf_spec** out);
ooaf_status ooaf_spec_builtin(const char* task, ooaf_spec** out);
ooaf_status ooaf_spec_to_json(const ooaf_spec* spec, char** out);
int ooaf_spec_num_terms(const ooaf_spec* spec);
void ooaf_spec_free(ooaf_spec* spec);

/* Scores one candidate transform. per_term (nullable) must hold
 * ooaf_spec_num_terms entries. */
ooaf_status ooaf_objective(const ooaf_spec* spec, const ooaf_cloud* src, const ooaf_cloud* tgt,
                           int channel, const double* rotation, const double* translation,
                           double* total, double* per_term);

/* Random-restart Nelder-Mead pose optimization. rotation_out: row-major 3x3.
 * per_term nullable as above. */
ooaf_status ooaf_solve(const ooaf_spec* spec, const ooaf_cloud* src, const ooaf_cloud* tgt,
                       int channel, int restarts, int max_iters, uint64_t seed,
                       double* rotation_out, double* translation_out, double* total_score,
                       double* per_term, int* best_restart);

#ifdef __cplusplus
}
#endif

#endif /* OOAF_H */
