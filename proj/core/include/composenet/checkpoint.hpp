#pragma once

#include <map>
#include <string>

#include "composenet/params.hpp"

namespace composenet {

// Free-form string metadata persisted with a checkpoint (method, task,
// template kind, steps, seed, config hash, ...).
using CheckpointMetadata = std::map<std::string, std::string>;

// A checkpoint is a pair of files:
//   <prefix>.json  manifest: format version, metadata, ordered entries with
//                  name, shape, byte offset and frozen flag
//   <prefix>.bin   the parameters as little-endian 32-bit floats,
//                  concatenated in manifest order
// Save -> load round-trips bit-exactly; loading verifies the blob length
// against the manifest.
void save_checkpoint(const std::string& prefix, const ParamSet& params,
                     const CheckpointMetadata& meta = {});

struct LoadedCheckpoint {
  ParamSet params;
  CheckpointMetadata meta;
};
// Throws MissingPrerequisiteError if either file is absent or inconsistent.
LoadedCheckpoint load_checkpoint(const std::string& prefix);

bool checkpoint_exists(const std::string& prefix);

}  // namespace composenet
