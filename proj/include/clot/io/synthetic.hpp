#pragma once

#include <string>
#include <vector>

#include "clot/io/config.hpp"

namespace clot::io {

struct SyntheticSummary {
  std::size_t n_videos = 0;
  std::size_t k_actions = 0;
  std::size_t total_frames = 0;
  std::string manifest_path;
};

// K unit-norm prototypes with pairwise cosine <= 0.3 (rejection sampled);
// per-video segment plans per `ordering`; frame = prototype + N(0, sigma^2 I).
// Writes features/*.cft, labels/*.txt and manifest.json under out_dir.
SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir);

// In-memory variant used by tests and the acceptance suite.
struct SyntheticDataset {
  std::vector<Video> videos;
  DenseMatrix prototypes;  // (K [+1 background]) x d
};

SyntheticDataset generate_synthetic_memory(const SyntheticSpec& spec);

}  // namespace clot::io
