#include "clot/io/formats.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace clot::io {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'O', 'T', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(const std::string& buf, std::size_t pos) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + b])) << (8 * b);
  return v;
}

}  // namespace

void write_feature_file(const std::string& path, const DenseMatrix& features) {
  require_nonempty(features, "write_feature_file");
  std::string out;
  out.reserve(20 + 4 * features.size());
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(features.rows));
  put_u32(out, static_cast<std::uint32_t>(features.cols));
  for (double v : features.data) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    put_u32(out, bits);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("feature file: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw InputError("feature file: write failed: " + path);
}

DenseMatrix read_feature_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("feature file: cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 20)
    throw FormatError("feature file: header truncated (" + std::to_string(buf.size()) +
                      " bytes, need 20): " + path);
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw FormatError("feature file: bad magic at byte offset 0: " + path);
  const std::uint32_t version = get_u32(buf, 8);
  if (version != kVersion)
    throw FormatError("feature file: unsupported version " + std::to_string(version) +
                      " at byte offset 8: " + path);
  const std::uint32_t n = get_u32(buf, 12);
  const std::uint32_t d = get_u32(buf, 16);
  const std::size_t expected = 20 + 4ull * n * d;
  if (buf.size() != expected)
    throw FormatError("feature file: payload size mismatch, expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(buf.size()) +
                      ": " + path);

  DenseMatrix m(n, d);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::uint32_t bits = get_u32(buf, 20 + 4 * i);
    m.data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  ensure_finite(m, "feature file payload");
  return m;
}

void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw InputError("label file: cannot open for writing: " + path);
  for (int v : labels) f << v << '\n';
  if (!f) throw InputError("label file: write failed: " + path);
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("label file: cannot open: " + path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t idx = 0;
    long v = 0;
    try {
      v = std::stol(line, &idx);
    } catch (const std::exception&) {
      throw FormatError("label file: line " + std::to_string(line_no) + " is not an integer: " +
                        path);
    }
    if (idx != line.size() || v < 0)
      throw FormatError("label file: line " + std::to_string(line_no) +
                        " must be a nonnegative integer: " + path);
    labels.push_back(static_cast<int>(v));
  }
  if (labels.empty()) throw FormatError("label file: no labels in " + path);
  return labels;
}

std::vector<Video> load_dataset(const std::string& dir, bool require_labels) {
  namespace fs = std::filesystem;
  const fs::path feat_dir = fs::path(dir) / "features";
  if (!fs::is_directory(feat_dir))
    throw InputError("dataset: missing features/ directory under " + dir);

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(feat_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cft")
      names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw InputError("dataset: no .cft files under " + feat_dir.string());

  std::vector<Video> videos;
  videos.reserve(names.size());
  for (const auto& name : names) {
    Video v;
    v.name = name;
    v.features = read_feature_file((feat_dir / (name + ".cft")).string());
    const fs::path label_path = fs::path(dir) / "labels" / (name + ".txt");
    if (fs::exists(label_path)) {
      v.labels = read_labels(label_path.string());
      if (v.labels.size() != v.features.rows)
        throw InputError("dataset: label count " + std::to_string(v.labels.size()) +
                         " does not match frame count " + std::to_string(v.features.rows) +
                         " for video " + name);
    } else if (require_labels) {
      throw InputError("dataset: missing label file " + label_path.string());
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

}  // namespace clot::io
