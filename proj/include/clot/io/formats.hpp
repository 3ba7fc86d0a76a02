#pragma once

#include <string>
#include <vector>

#include "clot/matrix.hpp"

namespace clot::io {

// FeatureFile: magic "CLOTFEAT", version u32, N u32, D u32, then N*D
// little-endian 32-bit reals, row-major. 32-bit storage, 64-bit compute.
// Round-trips are bit-exact at the stored precision.
void write_feature_file(const std::string& path, const DenseMatrix& features);
DenseMatrix read_feature_file(const std::string& path);

// LabelFile: one nonnegative integer per line, one line per frame.
void write_labels(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels(const std::string& path);

struct Video {
  std::string name;        // stem shared by features/<name>.cft and labels/<name>.txt
  DenseMatrix features;    // N x D
  std::vector<int> labels; // may be empty when ground truth is absent
};

// Reads features/*.cft (sorted by name) and any matching labels/*.txt.
std::vector<Video> load_dataset(const std::string& dir, bool require_labels = false);

}  // namespace clot::io
