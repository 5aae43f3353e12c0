#pragma once

#include <filesystem>

#include "dypol/diffnum/param_store.hpp"

namespace dypol::diffnum {

// Checkpoint layout: <dir>/manifest.json listing (name, shape, offset) per
// entry plus <dir>/params.bin, a flat little-endian 64-bit float payload.
// Round trips are bit-exact.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& dir);
ParamStore load_checkpoint(const std::filesystem::path& dir);

}  // namespace dypol::diffnum
