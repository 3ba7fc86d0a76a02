// clot: synthetic data, training, segmentation, evaluation and standalone
// solving for the closed-loop optimal-transport action segmentation pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "clot/eval/eval.hpp"
#include "clot/eval/svg.hpp"
#include "clot/io/config.hpp"
#include "clot/io/synthetic.hpp"
#include "clot/model/checkpoint.hpp"
#include "clot/model/gradcheck.hpp"
#include "clot/parallel.hpp"
#include "clot/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitState = 3;
constexpr int kExitNumeric = 4;

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  const auto spec = clot::io::make_synthetic_spec(clot::io::parse_kv_file(spec_path));
  const auto summary = clot::io::generate_synthetic(spec, out_dir);
  std::cout << "synth: " << summary.n_videos << " videos, " << summary.k_actions << " actions, "
            << summary.total_frames << " frames -> " << out_dir << "\n"
            << "manifest: " << summary.manifest_path << "\n";
  return kExitOk;
}

std::size_t k_from_manifest(const std::string& data_dir) {
  const fs::path manifest = fs::path(data_dir) / "manifest.json";
  if (!fs::exists(manifest)) return 0;
  std::ifstream f(manifest);
  json j;
  f >> j;
  if (!j.contains("k_actions")) return 0;
  return j["k_actions"].get<std::size_t>();
}

int run_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_path, const std::string& log_path, long seed_flag,
              const std::string& only_video, bool force) {
  if (fs::exists(out_path) && !force)
    throw clot::StateError("train: output checkpoint exists (use --force): " + out_path);

  clot::pipeline::TrainConfig cfg;
  if (!config_path.empty()) cfg = clot::io::make_train_config(clot::io::parse_kv_file(config_path));
  if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
  if (cfg.k_actions == 0) cfg.k_actions = k_from_manifest(data_dir);
  if (cfg.k_actions == 0)
    throw clot::InputError("train: number of actions unknown; set k in the config "
                           "or provide a dataset manifest");

  auto videos = clot::io::load_dataset(data_dir);
  if (!only_video.empty()) {
    // video-level protocol: one model per video
    std::erase_if(videos, [&](const clot::io::Video& v) { return v.name != only_video; });
    if (videos.empty())
      throw clot::InputError("train: no video named '" + only_video + "' in " + data_dir);
  }
  const std::size_t input_dim = videos.front().features.cols;

  clot::Rng rng(cfg.seed);
  clot::pipeline::Trainer trainer(cfg, input_dim, cfg.k_actions, rng);
  clot::Rng actions_rng = clot::Rng(cfg.seed).fork(0xA);
  trainer.set_actions(clot::pipeline::init_actions(trainer.params(), videos, cfg.k_actions,
                                                   actions_rng));

  const auto log = trainer.train(videos);

  std::map<std::string, clot::DenseMatrix> extras;
  extras.emplace("swd_projections", trainer.projections().directions);
  extras.emplace("__infer_cfg__", clot::pipeline::pack_infer_config(trainer.config()));
  clot::model::write_checkpoint(out_path, trainer.params(), extras);

  if (!log_path.empty()) {
    std::ofstream lf(log_path, std::ios::trunc);
    if (!lf) throw clot::InputError("train: cannot open log file: " + log_path);
    for (const auto& rec : log) {
      json j{{"epoch", rec.epoch},
             {"loss", rec.losses.loss},
             {"loss_S", rec.losses.loss_s},
             {"loss_R", rec.losses.loss_r},
             {"wall_ms", rec.wall_ms}};
      lf << j.dump() << "\n";
    }
  }
  const double final_loss =
      log.empty() ? 0.0 : log.back().losses.loss + log.back().losses.loss_s +
                              log.back().losses.loss_r;
  std::cout << "train: " << log.size() << " steps, final total loss " << final_loss << "\n"
            << "checkpoint: " << out_path << "\n";
  return kExitOk;
}

int run_segment(const std::string& data_dir, const std::string& ckpt_path,
                const std::string& out_dir, const std::string& decode_from,
                std::size_t subsample) {
  clot::pipeline::DecodeFrom decode;
  if (decode_from == "T") decode = clot::pipeline::DecodeFrom::T;
  else if (decode_from == "P") decode = clot::pipeline::DecodeFrom::P;
  else if (decode_from == "TR") decode = clot::pipeline::DecodeFrom::TR;
  else throw clot::InputError("segment: --decode-from must be T, P or TR");

  auto loaded = clot::model::read_checkpoint(ckpt_path);
  clot::pipeline::TrainConfig cfg;
  const auto cfg_it = loaded.extras.find("__infer_cfg__");
  if (cfg_it != loaded.extras.end()) clot::pipeline::unpack_infer_config(cfg_it->second, cfg);
  cfg.tau = loaded.params.cfg.tau;
  if (subsample > 0) {
    cfg.eval_subsample = true;
    cfg.frames_per_video = subsample;
  } else {
    cfg.eval_subsample = false;
  }

  clot::swd::ProjectionSet proj;
  const auto proj_it = loaded.extras.find("swd_projections");
  if (proj_it == loaded.extras.end())
    throw clot::FormatError("segment: checkpoint is missing swd_projections");
  proj.directions = proj_it->second;

  const auto videos = clot::io::load_dataset(data_dir);
  fs::create_directories(fs::path(out_dir) / "labels");
  fs::create_directories(fs::path(out_dir) / "bands");

  std::vector<clot::pipeline::SegmentationResult> results(videos.size());
  clot::parallel_for(videos.size(), clot::resolve_thread_cap(), [&](std::size_t i) {
    clot::model::ModelParams params = loaded.params;  // per-worker copy
    results[i] = clot::pipeline::infer(videos[i], params, proj, cfg, decode);
  });

  bool wrote_gt = false;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    clot::io::write_labels((fs::path(out_dir) / "labels" / (videos[i].name + ".txt")).string(),
                           results[i].labels);
    std::vector<int> gt = videos[i].labels;
    if (!results[i].frame_indices.empty() && !gt.empty()) {
      // Subsampled decode: align ground truth to the sampled frames and keep
      // a copy so the predictions stay scoreable.
      std::vector<int> sampled;
      sampled.reserve(results[i].frame_indices.size());
      for (std::size_t f : results[i].frame_indices) sampled.push_back(gt[f]);
      gt = std::move(sampled);
      fs::create_directories(fs::path(out_dir) / "gt_labels");
      clot::io::write_labels(
          (fs::path(out_dir) / "gt_labels" / (videos[i].name + ".txt")).string(), gt);
      wrote_gt = true;
    }
    clot::eval::write_band_svg((fs::path(out_dir) / "bands" / (videos[i].name + ".svg")).string(),
                               gt, results[i].labels);
  }
  if (wrote_gt)
    std::cout << "segment: subsampled ground truth written to " << out_dir << "/gt_labels\n";
  std::cout << "segment: " << videos.size() << " videos decoded from " << decode_from << " -> "
            << out_dir << "\n";
  return kExitOk;
}

std::vector<std::pair<std::string, std::string>> collect_label_files(const std::string& dir) {
  fs::path base(dir);
  if (fs::is_directory(base / "labels")) base /= "labels";
  std::vector<std::pair<std::string, std::string>> out;
  if (!fs::is_directory(base)) throw clot::InputError("eval: not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      out.push_back({entry.path().stem().string(), entry.path().string()});
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw clot::InputError("eval: no .txt label files under " + dir);
  return out;
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& level,
             const std::string& out_path) {
  if (level != "video" && level != "activity")
    throw clot::InputError("eval: --level must be video or activity");

  const auto preds = collect_label_files(pred_dir);
  const auto gts = collect_label_files(gt_dir);

  std::map<std::string, std::string> gt_by_name(gts.begin(), gts.end());
  std::vector<std::vector<int>> pred_seqs, gt_seqs;
  for (const auto& [name, path] : preds) {
    const auto it = gt_by_name.find(name);
    if (it == gt_by_name.end())
      throw clot::InputError("eval: no ground-truth file for video '" + name + "'");
    pred_seqs.push_back(clot::io::read_labels(path));
    gt_seqs.push_back(clot::io::read_labels(it->second));
    gt_by_name.erase(it);
  }
  for (const auto& [name, path] : gt_by_name)
    throw clot::InputError("eval: no prediction file for video '" + name + "' (" + path + ")");

  const auto match_level =
      level == "video" ? clot::eval::MatchLevel::Video : clot::eval::MatchLevel::Activity;
  const auto relabeled = clot::eval::match_labels(pred_seqs, gt_seqs, match_level);
  const auto report = clot::eval::compute_metrics(relabeled, gt_seqs);

  json j{{"level", level},
         {"n_videos", pred_seqs.size()},
         {"mof", report.mof},
         {"f1", report.f1},
         {"miou", report.miou},
         {"per_class_iou", report.per_class_iou}};
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::trunc);
    if (!f) throw clot::InputError("eval: cannot open output: " + out_path);
    f << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int run_solve(const std::string& cost_path, double alpha, double epsilon, double lambda,
              double radius, std::size_t inner_iters, double tol,
              const std::string& out_path) {
  const clot::DenseMatrix cost_matrix = clot::io::read_feature_file(cost_path);
  clot::ot::OtConfig cfg;
  cfg.alpha = alpha;
  cfg.epsilon = epsilon;
  cfg.lambda = lambda;
  cfg.inner_iters = inner_iters;
  cfg.tol = tol;
  clot::cost::CostBundle bundle = clot::cost::make_bundle(cost_matrix, radius);
  const auto marg = clot::ot::Marginals::uniform(cost_matrix.rows, cost_matrix.cols);
  const clot::ot::Coupling coupling = clot::ot::solve_fused(bundle, marg, cfg);

  clot::io::write_feature_file(out_path, coupling.t);
  json sidecar{{"converged", coupling.converged},
               {"iterations_used", coupling.iterations_used},
               {"objective", coupling.objective}};
  std::ofstream sf(out_path + ".json", std::ios::trunc);
  if (!sf) throw clot::InputError("solve: cannot write sidecar: " + out_path + ".json");
  sf << sidecar.dump(2) << "\n";

  std::cout << "solve: " << cost_matrix.rows << "x" << cost_matrix.cols
            << (coupling.converged ? " converged" : " did NOT converge") << " in "
            << coupling.iterations_used << " inner iterations, objective "
            << coupling.objective << "\n";
  return kExitOk;
}

int run_check_grad(long seed) {
  const auto results =
      clot::model::run_gradient_checks(seed < 0 ? 7 : static_cast<std::uint64_t>(seed));
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-16s max_rel_err=%.3e %s\n", r.component.c_str(), r.max_rel_err,
                r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  if (!all_pass) {
    std::cout << "check-grad: FAILED\n";
    return kExitNumeric;
  }
  std::cout << "check-grad: all components within tolerance\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"closed-loop optimal transport action segmentation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "synthetic spec file (key = value)")->required();
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  std::string train_data, train_config, train_out, train_log, train_video;
  long train_seed = -1;
  bool train_force = false;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--config", train_config, "run config file");
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--log", train_log, "JSONL training log path");
  train->add_option("--seed", train_seed, "seed override");
  train->add_option("--video", train_video, "train on a single named video");
  train->add_flag("--force", train_force, "overwrite an existing checkpoint");

  auto* segment = app.add_subcommand("segment", "segment videos with a trained model");
  std::string seg_data, seg_ckpt, seg_out, seg_decode = "TR";
  std::size_t seg_subsample = 0;
  segment->add_option("--data", seg_data, "dataset directory")->required();
  segment->add_option("--ckpt", seg_ckpt, "checkpoint path")->required();
  segment->add_option("--out", seg_out, "output directory")->required();
  segment->add_option("--decode-from", seg_decode, "T | P | TR (default TR)");
  segment->add_option("--subsample", seg_subsample, "evaluate on n subsampled frames (0 = full)");

  auto* eval_cmd = app.add_subcommand("eval", "score predictions against ground truth");
  std::string eval_pred, eval_gt, eval_level = "activity", eval_out;
  eval_cmd->add_option("--pred", eval_pred, "prediction directory")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth directory")->required();
  eval_cmd->add_option("--level", eval_level, "video | activity (default activity)");
  eval_cmd->add_option("--out", eval_out, "metrics JSON output path");

  auto* solve = app.add_subcommand("solve", "run the fused solver on a raw cost matrix");
  std::string solve_cost, solve_out;
  double solve_alpha = 0.6, solve_eps = 0.07, solve_lambda = 1.0, solve_radius = 0.04;
  std::size_t solve_inner = 500;
  double solve_tol = 1e-6;
  solve->add_option("--cost", solve_cost, "cost matrix (FeatureFile format)")->required();
  solve->add_option("--alpha", solve_alpha, "GW weight in [0,1]");
  solve->add_option("--epsilon", solve_eps, "entropic regularization");
  solve->add_option("--lambda", solve_lambda, "KL penalty weight");
  solve->add_option("--radius", solve_radius, "band radius fraction");
  solve->add_option("--inner-iters", solve_inner, "scaling iteration budget");
  solve->add_option("--tol", solve_tol, "convergence tolerance");
  solve->add_option("--out", solve_out, "coupling output (FeatureFile format)")->required();

  auto* check = app.add_subcommand("check-grad", "finite-difference gradient suite");
  long check_seed = -1;
  check->add_option("--seed", check_seed, "seed for the random tiny model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitInput;
  }

  try {
    if (synth->parsed()) return run_synth(synth_spec, synth_out);
    if (train->parsed())
      return run_train(train_data, train_config, train_out, train_log, train_seed, train_video,
                       train_force);
    if (segment->parsed())
      return run_segment(seg_data, seg_ckpt, seg_out, seg_decode, seg_subsample);
    if (eval_cmd->parsed()) return run_eval(eval_pred, eval_gt, eval_level, eval_out);
    if (solve->parsed())
      return run_solve(solve_cost, solve_alpha, solve_eps, solve_lambda, solve_radius,
                       solve_inner, solve_tol, solve_out);
    if (check->parsed()) return run_check_grad(check_seed);
  } catch (const clot::StateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitState;
  } catch (const clot::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const clot::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
