#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ooaf {

/// All architecture and training hyperparameters. Training defaults are ours;
/// architecture defaults follow the encoder/decoder tables.
struct ModelConfig {
    int token_dim = 512;
    int num_groups = 256;   // T
    int group_size = 64;    // k
    double group_radius = 0.15;
    std::vector<int> patch_hidden = {784, 512};  // last entry must equal token_dim
    int pos_dim = 512;      // hidden width of the positional MLP
    int heads = 8;
    double dropout = 0.1;
    int decoder_blocks = 2;
    int ff_hidden = 1024;
    std::vector<int> head_hidden = {512, 256};
    int channels = 5;       // K
    int feature_dim = 1024; // n
    double norm_epsilon = 1e-5;
    uint64_t seed = 0;

    // training
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 300;
    bool augment = true;
    double jitter_std = 0.005;

    // attention variant; self-attention is the joint-attention ablation
    bool cross_attention = true;

    void validate() const {
        if (token_dim < 1 || num_groups < 1 || group_size < 1 || heads < 1 || channels < 1 ||
            decoder_blocks < 1 || ff_hidden < 1 || pos_dim < 1 || feature_dim < 0)
            throw std::invalid_argument("config dims must be >= 1");
        if (token_dim % heads != 0)
            throw std::invalid_argument("token_dim must be divisible by heads");
        if (patch_hidden.size() != 2 || patch_hidden.back() != token_dim)
            throw std::invalid_argument("patch_hidden must be [h1, token_dim]");
        if (head_hidden.size() != 2) throw std::invalid_argument("head_hidden must have 2 entries");
    }

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);

    /// Desk-scale configuration used for gradient verification.
    static ModelConfig small();
};

}  // namespace ooaf
