#include "clot/pipeline/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "clot/kmeans.hpp"

namespace clot::pipeline {

std::size_t TrainConfig::k_queries() const {
  const long kq = static_cast<long>(k_actions) + nseg;
  return kq < 1 ? 1 : static_cast<std::size_t>(kq);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ParamError("config: batch_size must be >= 1");
  if (frames_per_video < 1) throw ParamError("config: frames_per_video must be >= 1");
  if (k_actions >= 1 && frames_per_video < k_actions)
    throw ParamError("config: frames_per_video must be >= k");
  if (lr < 0.0) throw ParamError("config: lr must be nonnegative");
  if (dropout < 0.0 || dropout >= 1.0) throw ParamError("config: dropout must be in [0,1)");
  if (!(tau > 0.0)) throw ParamError("config: tau must be positive");
  if (rho < 0.0 || rho_s < 0.0) throw ParamError("config: rho must be nonnegative");
  if (p_factor < 1) throw ParamError("config: p_factor must be >= 1");
  ot::validate(stage1);
  ot::validate(stage2);
  ot::validate(stage3);
}

std::vector<std::size_t> subsample_indices(std::size_t n_frames, std::size_t n_target,
                                           bool train_mode, Rng& rng) {
  std::vector<std::size_t> indices;
  if (n_frames == 0) return indices;
  if (n_frames <= n_target) {
    indices.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) indices[i] = i;
    return indices;
  }
  indices.reserve(n_target);
  for (std::size_t k = 0; k < n_target; ++k) {
    if (train_mode) {
      const std::size_t lo = k * n_frames / n_target;
      const std::size_t hi = (k + 1) * n_frames / n_target;  // > lo since n_frames > n_target
      indices.push_back(lo + rng.uniform_below(hi - lo));
    } else {
      indices.push_back((2 * k + 1) * n_frames / (2 * n_target));
    }
  }
  return indices;
}

DenseMatrix gather_rows(const DenseMatrix& m, const std::vector<std::size_t>& indices) {
  DenseMatrix out(indices.size(), m.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = m.row(indices[i]);
    std::copy(src, src + m.cols, out.row(i));
  }
  return out;
}

std::vector<Segment> run_length_encode(const std::vector<int>& labels) {
  std::vector<Segment> segments;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= labels.size(); ++i) {
    if (i == labels.size() || labels[i] != labels[start]) {
      segments.push_back({start, i, labels[start]});
      start = i;
    }
  }
  return segments;
}

DenseMatrix init_actions(const model::ModelParams& params, const std::vector<io::Video>& videos,
                         std::size_t k, Rng& rng, std::size_t max_frames) {
  std::size_t total = 0;
  for (const auto& v : videos) total += v.features.rows;
  if (total < k) throw ParamError("init_actions: fewer frames than actions");

  // Uniform stride over the concatenated frame index space.
  const std::size_t take = std::min(total, max_frames);
  DenseMatrix pool(take, params.cfg.input_dim);
  std::size_t written = 0;
  std::size_t cursor = 0;  // global frame index
  std::size_t next_pick = 0;
  for (const auto& v : videos) {
    for (std::size_t i = 0; i < v.features.rows; ++i, ++cursor) {
      if (written < take && cursor == next_pick) {
        const double* src = v.features.row(i);
        std::copy(src, src + v.features.cols, pool.row(written));
        ++written;
        next_pick = written * total / take;
      }
    }
  }
  pool.rows = written;
  pool.data.resize(written * pool.cols);

  const DenseMatrix encoded = model::encode_values(params, pool);
  clot::KMeansResult km = clot::kmeans(encoded, k, rng);
  return km.centroids;
}

StageCouplings solve_stages(const DenseMatrix& frames, const DenseMatrix& segments,
                            const DenseMatrix& refined, const DenseMatrix& actions,
                            const TrainConfig& cfg, const swd::ProjectionSet& proj) {
  StageCouplings out;
  const std::size_t n = frames.rows;
  const std::size_t k = actions.rows;
  const std::size_t kq = segments.rows;

  // Stage 1: frames -> actions, SWD-augmented cost.
  {
    cost::CostBundle bundle =
        cost::make_bundle(cost::frame_kot_cost(frames, actions, cfg.rho, proj), cfg.nr_fraction);
    out.t = ot::solve_fused(bundle, ot::Marginals::uniform(n, k), cfg.stage1);
  }
  // Stage 2: segments -> actions, adjacent queries are radius-1 neighbors.
  {
    cost::CostBundle bundle =
        cost::make_bundle_radius(cost::segment_kot_cost(segments, actions, cfg.rho_s), 1);
    out.t_s = ot::solve_fused(bundle, ot::Marginals::uniform(kq, k), cfg.stage2);
  }
  // Stage 3: refined frames -> actions; SWD only if explicitly re-enabled.
  {
    cost::CostBundle bundle = cost::make_bundle(
        cost::refined_kot_cost(refined, actions, cfg.rho, cfg.use_swd_stage3 ? &proj : nullptr),
        cfg.nr_fraction);
    out.t_r = ot::solve_fused(bundle, ot::Marginals::uniform(n, k), cfg.stage3);
  }
  return out;
}

Trainer::Trainer(TrainConfig cfg, std::size_t input_dim, std::size_t k_actions, Rng rng)
    : cfg_(std::move(cfg)), rng_(rng) {
  cfg_.k_actions = k_actions;
  cfg_.validate();
  if (k_actions < 1) throw ParamError("Trainer: k_actions must be >= 1");

  model::ModelConfig mc;
  mc.input_dim = input_dim;
  mc.hidden_dim = cfg_.hidden_dim;
  mc.embed_dim = cfg_.embed_dim;
  mc.dec_dim = cfg_.dec_dim;
  mc.k_actions = k_actions;
  mc.k_queries = cfg_.k_queries();
  mc.layers = cfg_.layers;
  mc.heads = cfg_.heads;
  mc.tau = cfg_.tau;
  mc.dropout = cfg_.dropout;
  mc.detach_s_in_refine = cfg_.detach_s_in_refine;

  Rng init_rng = rng_.fork(0x1);
  params_ = model::ModelParams::init(mc, init_rng);

  Rng proj_rng = rng_.fork(0x2);
  projections_ = swd::sample_projections(cfg_.embed_dim, cfg_.p_factor, proj_rng);

  adam_.cfg.lr = cfg_.lr;
  adam_.cfg.weight_decay = cfg_.weight_decay;
  adam_.init_like(params_);
  grads_.init_like(params_);
}

void Trainer::set_actions(DenseMatrix actions) {
  if (actions.rows != params_.cfg.k_actions || actions.cols != params_.cfg.embed_dim)
    throw DimensionError("set_actions: centroid shape disagrees with model");
  params_.actions = std::move(actions);
}

StepLosses Trainer::train_step(const std::vector<const io::Video*>& batch) {
  if (batch.empty()) throw ParamError("train_step: empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  grads_.zero();
  StepLosses losses;

  for (const io::Video* video : batch) {
    Rng video_rng = rng_.fork(0x10);
    std::vector<std::size_t> idx =
        subsample_indices(video->features.rows, cfg_.frames_per_video, /*train=*/true, video_rng);
    const DenseMatrix x = gather_rows(video->features, idx);

    model::ForwardPass pass = model::forward_embeddings(params_, x, video_rng, /*train=*/true);

    // Pseudo-labels from the current embeddings; constants from here on.
    StageCouplings stages =
        solve_stages(pass.tape.value(pass.frames), pass.tape.value(pass.segments),
                     pass.tape.value(pass.refined), params_.actions, cfg_, projections_);
    losses.all_converged =
        losses.all_converged && stages.t.converged && stages.t_s.converged && stages.t_r.converged;

    const int p = model::predict_node(pass, params_, pass.frames);
    const int ps = model::predict_node(pass, params_, pass.segments);
    const int pr = model::predict_node(pass, params_, pass.refined);
    const int l1 = model::cross_entropy_node(pass, p, stages.t.t, inv_b);
    const int l2 = model::cross_entropy_node(pass, ps, stages.t_s.t, inv_b);
    const int l3 = model::cross_entropy_node(pass, pr, stages.t_r.t, inv_b);
    const int total = model::add_losses(pass, {l1, l2, l3});

    const double step_loss = pass.tape.value(total)(0, 0);
    if (!std::isfinite(step_loss)) throw NumericError("train_step: non-finite loss");
    losses.loss += pass.tape.value(l1)(0, 0);
    losses.loss_s += pass.tape.value(l2)(0, 0);
    losses.loss_r += pass.tape.value(l3)(0, 0);

    model::backward_accumulate(pass, params_, total, grads_);
  }

  model::adam_step(params_, grads_, adam_);
  return losses;
}

std::vector<LogRecord> Trainer::train(const std::vector<io::Video>& videos) {
  if (videos.empty()) throw ParamError("train: empty dataset");
  std::vector<LogRecord> log;
  std::vector<std::size_t> order(videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    // Fisher-Yates from the run stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng_.uniform_below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
      std::vector<const io::Video*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&videos[order[i]]);
      const auto start = std::chrono::steady_clock::now();
      LogRecord rec;
      rec.epoch = epoch;
      rec.losses = train_step(batch);
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      log.push_back(rec);
    }
  }
  return log;
}

SegmentationResult infer(const io::Video& video, model::ModelParams& params,
                         const swd::ProjectionSet& proj, const TrainConfig& cfg,
                         DecodeFrom decode_from) {
  Rng eval_rng(0);  // eval mode draws nothing
  DenseMatrix x = video.features;
  std::vector<std::size_t> idx;
  if (cfg.eval_subsample && video.features.rows > cfg.frames_per_video) {
    idx = subsample_indices(video.features.rows, cfg.frames_per_video, /*train=*/false, eval_rng);
    x = gather_rows(video.features, idx);
  }

  model::ForwardPass pass = model::forward_embeddings(params, x, eval_rng, /*train=*/false);
  const DenseMatrix& frames = pass.tape.value(pass.frames);
  const DenseMatrix& refined = pass.tape.value(pass.refined);

  SegmentationResult result;
  switch (decode_from) {
    case DecodeFrom::P: {
      // Bypass OT entirely: argmax of the frame prediction head.
      const DenseMatrix p = model::predict(frames, params.actions, params.cfg.tau);
      result.labels.resize(p.rows);
      for (std::size_t i = 0; i < p.rows; ++i) {
        const double* row = p.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < p.cols; ++j)
          if (row[j] > row[best]) best = j;
        result.labels[i] = static_cast<int>(best);
      }
      result.source_stage = "P";
      break;
    }
    case DecodeFrom::T: {
      cost::CostBundle bundle =
          cost::make_bundle(cost::frame_kot_cost(frames, params.actions, cfg.rho, proj),
                            cfg.nr_fraction);
      ot::Coupling t =
          ot::solve_fused(bundle, ot::Marginals::uniform(frames.rows, params.actions.rows),
                          cfg.stage1);
      result.labels = ot::decode_labels(t);
      result.source_stage = "T";
      break;
    }
    case DecodeFrom::TR: {
      cost::CostBundle bundle = cost::make_bundle(
          cost::refined_kot_cost(refined, params.actions, cfg.rho,
                                 cfg.use_swd_stage3 ? &proj : nullptr),
          cfg.nr_fraction);
      ot::Coupling t_r =
          ot::solve_fused(bundle, ot::Marginals::uniform(refined.rows, params.actions.rows),
                          cfg.stage3);
      result.labels = ot::decode_labels(t_r);
      result.source_stage = "TR";
      break;
    }
  }
  result.segments = run_length_encode(result.labels);
  result.frame_indices = std::move(idx);
  return result;
}

DenseMatrix pack_infer_config(const TrainConfig& cfg) {
  DenseMatrix packed(1, 17);
  auto put_stage = [&](std::size_t base, const ot::OtConfig& s) {
    packed.data[base + 0] = s.alpha;
    packed.data[base + 1] = s.epsilon;
    packed.data[base + 2] = s.lambda;
    packed.data[base + 3] = static_cast<double>(s.outer_iters);
    packed.data[base + 4] = static_cast<double>(s.inner_iters);
    packed.data[base + 5] = s.tol;
  };
  packed.data[0] = cfg.rho;
  packed.data[1] = cfg.rho_s;
  packed.data[2] = cfg.nr_fraction;
  packed.data[3] = cfg.use_swd_stage3 ? 1.0 : 0.0;
  packed.data[4] = static_cast<double>(cfg.frames_per_video);
  put_stage(5, cfg.stage1);
  put_stage(11, cfg.stage3);
  return packed;
}

void unpack_infer_config(const DenseMatrix& packed, TrainConfig& cfg) {
  if (packed.size() != 17) throw FormatError("checkpoint: malformed inference config tensor");
  auto get_stage = [&](std::size_t base, ot::OtConfig& s) {
    s.alpha = packed.data[base + 0];
    s.epsilon = packed.data[base + 1];
    s.lambda = packed.data[base + 2];
    s.outer_iters = static_cast<std::size_t>(packed.data[base + 3]);
    s.inner_iters = static_cast<std::size_t>(packed.data[base + 4]);
    s.tol = packed.data[base + 5];
  };
  cfg.rho = packed.data[0];
  cfg.rho_s = packed.data[1];
  cfg.nr_fraction = packed.data[2];
  cfg.use_swd_stage3 = packed.data[3] != 0.0;
  cfg.frames_per_video = static_cast<std::size_t>(packed.data[4]);
  get_stage(5, cfg.stage1);
  get_stage(11, cfg.stage3);
}

}  // namespace clot::pipeline
