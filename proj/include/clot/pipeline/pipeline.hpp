#pragma once

#include <string>
#include <vector>

#include "clot/io/formats.hpp"
#include "clot/model/adam.hpp"
#include "clot/model/model.hpp"
#include "clot/ot/solver.hpp"
#include "clot/swd/swd.hpp"

namespace clot::pipeline {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 2;
  std::size_t frames_per_video = 256;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double dropout = 0.5;
  ot::OtConfig stage1, stage2, stage3;
  double rho = 0.15;    // temporal prior weight, frame stages
  double rho_s = 0.15;  // temporal prior weight, segment stage
  double nr_fraction = 0.04;
  long nseg = 0;  // K' = max(1, K + nseg)
  std::size_t p_factor = 2;
  double tau = 1.0;
  std::uint64_t seed = 1;
  std::size_t k_actions = 0;  // required; 0 means "take it from the manifest"
  std::size_t hidden_dim = 128;
  std::size_t embed_dim = 64;
  std::size_t dec_dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 8;
  bool use_swd_stage3 = false;
  bool detach_s_in_refine = false;
  bool eval_subsample = false;

  std::size_t k_queries() const;
  void validate() const;
};

struct Segment {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  int label = 0;
};

struct SegmentationResult {
  std::vector<int> labels;
  std::vector<Segment> segments;
  std::string source_stage;  // "T", "P" or "TR"
  std::vector<std::size_t> frame_indices;  // populated in subsampled mode only
};

enum class DecodeFrom { T, P, TR };

// N frames split into n_target equal intervals; one frame per interval,
// uniform in train mode, the interval midpoint in eval mode. All frames in
// order when N < n_target.
std::vector<std::size_t> subsample_indices(std::size_t n_frames, std::size_t n_target,
                                           bool train_mode, Rng& rng);
DenseMatrix gather_rows(const DenseMatrix& m, const std::vector<std::size_t>& indices);

std::vector<Segment> run_length_encode(const std::vector<int>& labels);

// k-means over encoder outputs of a uniform frame subsample; centroids
// become the action embeddings A.
DenseMatrix init_actions(const model::ModelParams& params, const std::vector<io::Video>& videos,
                         std::size_t k, Rng& rng, std::size_t max_frames = 10000);

struct StepLosses {
  double loss = 0.0;    // frame stage, batch mean
  double loss_s = 0.0;  // segment stage
  double loss_r = 0.0;  // refined stage
  bool all_converged = true;
};

struct LogRecord {
  std::size_t epoch = 0;
  StepLosses losses;
  double wall_ms = 0.0;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::size_t input_dim, std::size_t k_actions, Rng rng);

  // One optimizer step over a batch of videos (subsampled views).
  StepLosses train_step(const std::vector<const io::Video*>& batch);

  // Full training loop; returns per-step log records.
  std::vector<LogRecord> train(const std::vector<io::Video>& videos);

  model::ModelParams& params() { return params_; }
  const model::ModelParams& params() const { return params_; }
  const swd::ProjectionSet& projections() const { return projections_; }
  const TrainConfig& config() const { return cfg_; }

  void set_actions(DenseMatrix actions);

 private:
  TrainConfig cfg_;
  model::ModelParams params_;
  swd::ProjectionSet projections_;
  model::AdamState adam_;
  model::GradientStore grads_;
  Rng rng_;
};

// The three pseudo-label couplings for one video's (sub)sampled features.
struct StageCouplings {
  ot::Coupling t;    // frames -> actions
  ot::Coupling t_s;  // segments -> actions
  ot::Coupling t_r;  // refined frames -> actions
};

StageCouplings solve_stages(const DenseMatrix& frames, const DenseMatrix& segments,
                            const DenseMatrix& refined, const DenseMatrix& actions,
                            const TrainConfig& cfg, const swd::ProjectionSet& proj);

// Full-length inference through stages 1-3 in eval mode.
SegmentationResult infer(const io::Video& video, model::ModelParams& params,
                         const swd::ProjectionSet& proj, const TrainConfig& cfg,
                         DecodeFrom decode_from = DecodeFrom::TR);

// The slice of TrainConfig that inference needs, packed as a checkpoint
// tensor so `segment` runs from the checkpoint alone.
DenseMatrix pack_infer_config(const TrainConfig& cfg);
void unpack_infer_config(const DenseMatrix& packed, TrainConfig& cfg);

}  // namespace clot::pipeline
