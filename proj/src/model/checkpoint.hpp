#pragma once

#include <string>

#include "model/net.hpp"

namespace ooaf {

/// Checkpoint: line "OOAF-CKPT 1", one-line JSON config echo, then per tensor
/// "name rank dims...\n" followed by little-endian 32-bit floats row-major.
void save_checkpoint(const Net<float>& net, const std::string& path);
Net<float> load_checkpoint(const std::string& path);

}  // namespace ooaf
