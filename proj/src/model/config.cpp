#include "model/config.hpp"

namespace ooaf {

nlohmann::json ModelConfig::to_json() const {
    return {{"token_dim", token_dim},
            {"num_groups", num_groups},
            {"group_size", group_size},
            {"group_radius", group_radius},
            {"patch_hidden", patch_hidden},
            {"pos_dim", pos_dim},
            {"heads", heads},
            {"dropout", dropout},
            {"decoder_blocks", decoder_blocks},
            {"ff_hidden", ff_hidden},
            {"head_hidden", head_hidden},
            {"channels", channels},
            {"feature_dim", feature_dim},
            {"norm_epsilon", norm_epsilon},
            {"seed", seed},
            {"learning_rate", learning_rate},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"epochs", epochs},
            {"augment", augment},
            {"jitter_std", jitter_std},
            {"cross_attention", cross_attention}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("token_dim", c.token_dim);
    get("num_groups", c.num_groups);
    get("group_size", c.group_size);
    get("group_radius", c.group_radius);
    get("patch_hidden", c.patch_hidden);
    get("pos_dim", c.pos_dim);
    get("heads", c.heads);
    get("dropout", c.dropout);
    get("decoder_blocks", c.decoder_blocks);
    get("ff_hidden", c.ff_hidden);
    get("head_hidden", c.head_hidden);
    get("channels", c.channels);
    get("feature_dim", c.feature_dim);
    get("norm_epsilon", c.norm_epsilon);
    get("seed", c.seed);
    get("learning_rate", c.learning_rate);
    get("adam_beta1", c.adam_beta1);
    get("adam_beta2", c.adam_beta2);
    get("adam_eps", c.adam_eps);
    get("epochs", c.epochs);
    get("augment", c.augment);
    get("jitter_std", c.jitter_std);
    get("cross_attention", c.cross_attention);
    c.validate();
    return c;
}

ModelConfig ModelConfig::small() {
    ModelConfig c;
    c.token_dim = 32;
    c.num_groups = 8;
    c.group_size = 8;
    c.group_radius = 0.5;
    c.patch_hidden = {48, 32};
    c.pos_dim = 32;
    c.heads = 4;
    c.dropout = 0.0;
    c.decoder_blocks = 2;
    c.ff_hidden = 64;
    c.head_hidden = {32, 16};
    c.channels = 2;
    c.feature_dim = 8;
    c.seed = 3;
    return c;
}

}  // namespace ooaf
