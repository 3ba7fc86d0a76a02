#pragma once

#include <map>
#include <string>

#include "clot/pipeline/pipeline.hpp"

namespace clot::io {

// Flat key = value text, `#` comments. Returned in file order is not needed;
// a map suffices since duplicate keys are rejected.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Applies a parsed map onto the defaults. Unknown keys are rejected with the
// offending name. Bare OT keys (alpha, epsilon, lambda, outer_iters,
// inner_iters, tol) set all three stages; stage1_/stage2_/stage3_ prefixes
// override per stage.
pipeline::TrainConfig make_train_config(const std::map<std::string, std::string>& kv);

struct SyntheticSpec {
  std::size_t k_actions = 4;
  std::size_t n_videos = 10;
  std::size_t frames_per_video = 120;
  std::size_t feature_dim = 16;
  double noise_sigma = 0.1;
  std::size_t min_segment = 8;
  std::size_t max_segment = 64;
  std::string ordering = "permuted";  // fixed | permuted | markov
  double background_fraction = 0.0;
  std::uint64_t seed = 1;
};

SyntheticSpec make_synthetic_spec(const std::map<std::string, std::string>& kv);

}  // namespace clot::io
