#pragma once

#include <string>
#include <utility>
#include <vector>

#include "data/manifest.hpp"
#include "model/net.hpp"

namespace ooaf {

struct TrainResult {
    Net<float> net;
    std::vector<double> loss_history;  // one entry per (epoch, sample)
};

/// One-shot training: Adam over the K training pairs in fixed category order.
/// Aborts with the epoch index if the loss goes non-finite.
TrainResult train_one_shot(const std::vector<ObjectPair>& train_pairs, const ModelConfig& cfg);
TrainResult train_one_shot(const DatasetManifest& manifest, const ModelConfig& cfg);

/// Eval-mode forward on a raw (unnormalized) pair; returns per-point N x K
/// maps for source and target.
std::pair<MatX, MatX> predict(const Net<float>& net, const ObjectPair& pair);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<std::pair<std::string, double>> per_tensor;
};

/// Central finite differences (h = 1e-3) against the analytic gradient for
/// every parameter tensor, in 64-bit mode.
GradCheckReport grad_check(const ModelConfig& cfg = ModelConfig::small());

/// Writes tokenizer embeddings with generator part labels:
/// header "ooaf-emb 1 <rows> <dim>", then rows "e_1..e_dim part category".
void dump_patch_embeddings(const Net<float>& net, const std::vector<ObjectPair>& pairs,
                           const std::string& path);

}  // namespace ooaf
