// Copyright 2026 The SGN Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Binary checkpoint: "SGN1", u32 format version, u64 header length, the
// model config as key=value text, u32 record count, then one record per
// parameter followed by its momentum buffer under "<name>.m". A record is
// u32 name length, name bytes, u32 rank, u64 dims, float64 values. All
// integers and floats are little-endian.

#pragma once

#include <filesystem>
#include <memory>

#include "sgn/model/sgn.h"

namespace sgn::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(const model::SemanticGroupingNet &net, const std::filesystem::path &path);

// Restores values and momentum into `net`. Throws IncompatibleError naming
// the first tensor whose name or shape does not match, and FormatError with
// a byte offset on truncated or malformed files.
void LoadCheckpointInto(model::SemanticGroupingNet &net, const std::filesystem::path &path);

// Builds a network from the stored config and restores it.
std::unique_ptr<model::SemanticGroupingNet> LoadCheckpoint(const std::filesystem::path &path);

// Reads only the config header.
model::SgnConfig ReadCheckpointConfig(const std::filesystem::path &path);

}  // namespace sgn::train
