#include "clot/io/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "clot/kernels/kernels.hpp"
#include "clot/rng.hpp"

namespace clot::io {
namespace {

DenseMatrix sample_prototypes(std::size_t count, std::size_t d, Rng& rng) {
  DenseMatrix protos(count, d);
  std::vector<double> candidate(d);
  for (std::size_t p = 0; p < count; ++p) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < 100000; ++attempt) {
      double norm2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        candidate[j] = rng.normal();
        norm2 += candidate[j] * candidate[j];
      }
      if (norm2 == 0.0) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& v : candidate) v *= inv;
      bool ok = true;
      for (std::size_t q = 0; q < p && ok; ++q) {
        const double cosv = kernels::ops().dot(candidate.data(), protos.row(q), d);
        if (cosv > 0.3) ok = false;
      }
      if (ok) {
        std::copy(candidate.begin(), candidate.end(), protos.row(p));
        placed = true;
        break;
      }
    }
    if (!placed)
      throw Error("generate_synthetic: could not sample prototypes with pairwise cosine <= 0.3");
  }
  return protos;
}

// Durations proportional to weights drawn from [min, max], scaled to sum to
// n_frames with every part >= 1 (largest remainder rounding).
std::vector<std::size_t> plan_durations(std::size_t n_frames, std::size_t parts,
                                        std::size_t min_len, std::size_t max_len, Rng& rng) {
  std::vector<double> weights(parts);
  double total = 0.0;
  for (auto& w : weights) {
    w = static_cast<double>(min_len) +
        rng.uniform() * static_cast<double>(max_len - min_len);
    total += w;
  }
  std::vector<std::size_t> lengths(parts, 1);
  std::size_t assigned = parts;
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t i = 0; i < parts; ++i) {
    const double exact = weights[i] / total * static_cast<double>(n_frames);
    const auto extra = static_cast<std::size_t>(exact > 1.0 ? exact - 1.0 : 0.0);
    lengths[i] += extra;
    assigned += extra;
    remainders.push_back({exact - std::floor(exact), i});
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
  std::size_t r = 0;
  while (assigned < n_frames) {
    lengths[remainders[r % parts].second] += 1;
    ++assigned;
    ++r;
  }
  while (assigned > n_frames) {  // shave from the largest parts
    std::size_t big = 0;
    for (std::size_t i = 1; i < parts; ++i)
      if (lengths[i] > lengths[big]) big = i;
    if (lengths[big] <= 1) throw ParamError("generate_synthetic: too few frames for the plan");
    lengths[big] -= 1;
    --assigned;
  }
  return lengths;
}

std::vector<int> plan_labels(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t k = spec.k_actions;
  std::vector<int> sequence;
  if (spec.ordering == "fixed") {
    for (std::size_t a = 0; a < k; ++a) sequence.push_back(static_cast<int>(a));
  } else if (spec.ordering == "permuted") {
    for (std::size_t a = 0; a < k; ++a) sequence.push_back(static_cast<int>(a));
    for (std::size_t i = k; i > 1; --i) {
      const std::size_t j = rng.uniform_below(i);
      std::swap(sequence[i - 1], sequence[j]);
    }
  } else {  // markov: next label uniform among the others
    std::size_t approx_segments = std::max<std::size_t>(
        k, spec.frames_per_video / ((spec.min_segment + spec.max_segment) / 2 + 1) + 1);
    int current = static_cast<int>(rng.uniform_below(k));
    sequence.push_back(current);
    for (std::size_t s = 1; s < approx_segments; ++s) {
      if (k == 1) break;
      int next = static_cast<int>(rng.uniform_below(k - 1));
      if (next >= current) ++next;
      sequence.push_back(next);
      current = next;
    }
  }

  std::vector<std::size_t> durations = plan_durations(
      spec.frames_per_video, sequence.size(), spec.min_segment, spec.max_segment, rng);
  std::vector<int> labels;
  labels.reserve(spec.frames_per_video);
  for (std::size_t s = 0; s < sequence.size(); ++s)
    labels.insert(labels.end(), durations[s], sequence[s]);

  // Background: replace a leading slice of each segment with label K.
  if (spec.background_fraction > 0.0) {
    const auto bg_total =
        static_cast<std::size_t>(spec.background_fraction * static_cast<double>(labels.size()));
    const std::size_t per_segment = std::max<std::size_t>(1, bg_total / sequence.size());
    std::size_t pos = 0;
    std::size_t placed = 0;
    for (std::size_t s = 0; s < sequence.size() && placed < bg_total; ++s) {
      const std::size_t len = durations[s];
      const std::size_t take = std::min({per_segment, len > 1 ? len - 1 : 0, bg_total - placed});
      for (std::size_t f = 0; f < take; ++f) labels[pos + f] = static_cast<int>(spec.k_actions);
      placed += take;
      pos += len;
    }
  }
  return labels;
}

}  // namespace

SyntheticDataset generate_synthetic_memory(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  const bool background = spec.background_fraction > 0.0;
  const std::size_t proto_count = spec.k_actions + (background ? 1 : 0);

  SyntheticDataset ds;
  Rng proto_rng = rng.fork(1);
  ds.prototypes = sample_prototypes(proto_count, spec.feature_dim, proto_rng);

  for (std::size_t v = 0; v < spec.n_videos; ++v) {
    Rng video_rng = rng.fork(2 + v);
    Video video;
    char name[16];
    std::snprintf(name, sizeof(name), "v%03zu", v);
    video.name = name;
    video.labels = plan_labels(spec, video_rng);
    video.features = DenseMatrix(video.labels.size(), spec.feature_dim);
    for (std::size_t i = 0; i < video.labels.size(); ++i) {
      const double* proto = ds.prototypes.row(static_cast<std::size_t>(video.labels[i]));
      double* dst = video.features.row(i);
      for (std::size_t j = 0; j < spec.feature_dim; ++j)
        dst[j] = proto[j] + (spec.noise_sigma > 0.0 ? spec.noise_sigma * video_rng.normal() : 0.0);
    }
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

SyntheticSummary generate_synthetic(const SyntheticSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  SyntheticDataset ds = generate_synthetic_memory(spec);

  fs::create_directories(fs::path(out_dir) / "features");
  fs::create_directories(fs::path(out_dir) / "labels");

  nlohmann::json manifest;
  manifest["k_actions"] = spec.k_actions;
  manifest["n_videos"] = spec.n_videos;
  manifest["frames_per_video"] = spec.frames_per_video;
  manifest["feature_dim"] = spec.feature_dim;
  manifest["noise_sigma"] = spec.noise_sigma;
  manifest["ordering"] = spec.ordering;
  manifest["background_fraction"] = spec.background_fraction;
  manifest["seed"] = spec.seed;
  manifest["videos"] = nlohmann::json::array();

  SyntheticSummary summary;
  summary.n_videos = ds.videos.size();
  summary.k_actions = spec.k_actions;
  for (const auto& video : ds.videos) {
    write_feature_file((fs::path(out_dir) / "features" / (video.name + ".cft")).string(),
                       video.features);
    write_labels((fs::path(out_dir) / "labels" / (video.name + ".txt")).string(), video.labels);
    summary.total_frames += video.labels.size();

    nlohmann::json entry;
    entry["name"] = video.name;
    entry["segments"] = nlohmann::json::array();
    std::size_t start = 0;
    for (std::size_t i = 1; i <= video.labels.size(); ++i) {
      if (i == video.labels.size() || video.labels[i] != video.labels[start]) {
        entry["segments"].push_back({start, i, video.labels[start]});
        start = i;
      }
    }
    manifest["videos"].push_back(std::move(entry));
  }

  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) throw InputError("generate_synthetic: cannot write " + manifest_path);
  mf << manifest.dump(2) << '\n';
  summary.manifest_path = manifest_path;
  return summary;
}

}  // namespace clot::io
