#pragma once

#include <map>
#include <string>

#include "clot/model/model.hpp"

namespace clot::model {

// Checkpoint file: magic "CLOTCKPT", version u32, then named tensors in
// canonical order: name length u16, name bytes, rows u32, cols u32, row-major
// little-endian 64-bit reals. A "__meta__" tensor carries the structural
// config; extra tensors (e.g. the frozen SWD projections) ride along by name.
// Round-trips are bit-exact.
void write_checkpoint(const std::string& path, const ModelParams& params,
                      const std::map<std::string, DenseMatrix>& extras = {});

struct LoadedCheckpoint {
  ModelParams params;
  std::map<std::string, DenseMatrix> extras;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

}  // namespace clot::model
