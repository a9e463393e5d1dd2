#pragma once

#include <string>

#include "core/types.hpp"

namespace ooaf {

/// OOAF-PC v1 text format.
///   line 1: ooaf-pc 1 <N> <n> <K>
///   line 2 (optional): parts 1
///   N rows: x y z f_1..f_n [a_1..a_K] [part]
/// Parse errors name the offending line number.
FeatureCloud load_cloud(const std::string& path);
void save_cloud(const FeatureCloud& cloud, const std::string& path);

}  // namespace ooaf
