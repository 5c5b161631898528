#pragma once

#include "tabspec/model/transformer.hpp"

#include <filesystem>

namespace tabspec::model {

/// Directory layout: weights.bin (little-endian doubles, row-major per
/// tensor), manifest.txt ("name rows cols offset" per line, offsets in
/// doubles) and model.json (spec, feature groups, PE base, target scaling).
void save_checkpoint(const FTTransformer& model, const std::filesystem::path& dir);
FTTransformer load_checkpoint(const std::filesystem::path& dir);

}  // namespace tabspec::model
