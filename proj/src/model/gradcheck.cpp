#include "clot/model/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "clot/model/model.hpp"

namespace clot::model {
namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

// Rows sum to 1/n: the shape pseudo-labels actually take.
DenseMatrix random_target(std::size_t n, std::size_t k, Rng& rng) {
  DenseMatrix t(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      t(i, j) = rng.uniform() + 1e-3;
      total += t(i, j);
    }
    const double scale = 1.0 / (total * static_cast<double>(n));
    for (std::size_t j = 0; j < k; ++j) t(i, j) *= scale;
  }
  return t;
}

struct Component {
  std::string name;
  std::vector<DenseMatrix*> tensors;            // what finite differences wiggle
  std::function<double()> eval;                 // rebuilds the forward, returns loss
  std::function<std::vector<DenseMatrix>()> analytic;  // gradient per tensor
};

double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

GradCheckResult check_component(Component& comp, double tol, double step, double inject) {
  std::vector<DenseMatrix> grads = comp.analytic();
  if (inject != 0.0)
    for (auto& g : grads)
      if (g.size()) g.data[0] += inject;

  GradCheckResult res;
  res.component = comp.name;
  for (std::size_t t = 0; t < comp.tensors.size(); ++t) {
    DenseMatrix& theta = *comp.tensors[t];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta.data[i];
      theta.data[i] = saved + step;
      const double up = comp.eval();
      theta.data[i] = saved - step;
      const double down = comp.eval();
      theta.data[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double err = rel_err(fd, grads[t].data[i]);
      if (err > res.max_rel_err) res.max_rel_err = err;
    }
  }
  res.pass = res.max_rel_err <= tol;
  return res;
}

// Attention / feed-forward sub-blocks checked on free-standing leaves.
struct BlockFixture {
  std::vector<DenseMatrix> tensors;
  DenseMatrix loss_weights;

  // build() wires a tape from leaves for the current tensor values and
  // returns (loss node, leaf ids aligned with tensors).
  std::function<std::pair<int, std::vector<int>>(Tape&)> build;

  double eval() {
    Tape tape;
    auto [loss, ids] = build(tape);
    (void)ids;
    return tape.value(loss)(0, 0);
  }
  std::vector<DenseMatrix> analytic() {
    Tape tape;
    auto [loss, ids] = build(tape);
    tape.backward(loss);
    std::vector<DenseMatrix> out;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      out.push_back(tape.has_grad(ids[t]) ? tape.grad(ids[t])
                                          : DenseMatrix(tensors[t].rows, tensors[t].cols, 0.0));
    }
    return out;
  }
};

int mha_block(Tape& tape, int q_in, int kv_in, const std::vector<int>& w, std::size_t heads) {
  const std::size_t dd = tape.value(w[0]).cols;
  const std::size_t dh = dd / heads;
  const int q = tape.matmul(q_in, w[0]);
  const int k = tape.matmul(kv_in, w[1]);
  const int v = tape.matmul(kv_in, w[2]);
  std::vector<int> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const int qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    const int kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    const int vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
    const int logits =
        tape.scale_const(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    outs.push_back(tape.matmul(tape.softmax_rows(logits), vh));
  }
  return tape.matmul(tape.concat_cols(outs), w[3]);
}

}  // namespace

namespace {
std::vector<GradCheckResult> run_gradient_checks_attempt(std::uint64_t seed, double tol,
                                                         double step, double inject_error,
                                                         double* min_relu_margin);
}  // namespace

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, double tol, double step,
                                                 double inject_error) {
  // Central differences are invalid across ReLU kinks; re-seed the fixtures
  // until every ReLU input at the base point clears a safety margin.
  const double margin = 50.0 * step;
  for (int attempt = 0; attempt < 64; ++attempt) {
    double observed = 0.0;
    auto results = run_gradient_checks_attempt(seed + 1000003ull * attempt, tol, step,
                                               inject_error, &observed);
    if (observed > margin) return results;
  }
  throw NumericError("gradcheck: could not find a kink-free base point");
}

namespace {
std::vector<GradCheckResult> run_gradient_checks_attempt(std::uint64_t seed, double tol,
                                                         double step, double inject_error,
                                                         double* min_relu_margin) {
  std::vector<GradCheckResult> results;
  Rng rng(seed);

  // Tiny end-to-end model: N=7, D=5, d=4, K=3, K'=3, L=1, 2 heads.
  ModelConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden_dim = 6;
  cfg.embed_dim = 4;
  cfg.dec_dim = 4;
  cfg.k_actions = 3;
  cfg.k_queries = 3;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.tau = 0.5;
  cfg.dropout = 0.0;
  const std::size_t n_frames = 7;

  Rng init_rng = rng.fork(1);
  ModelParams params = ModelParams::init(cfg, init_rng);
  const DenseMatrix x = random_matrix(n_frames, cfg.input_dim, rng);
  const DenseMatrix w_frames = random_matrix(n_frames, cfg.embed_dim, rng, 0.5);
  const DenseMatrix w_segments = random_matrix(cfg.k_queries, cfg.embed_dim, rng, 0.5);
  const DenseMatrix t_frames = random_target(n_frames, cfg.k_actions, rng);
  const DenseMatrix t_segments = random_target(cfg.k_queries, cfg.k_actions, rng);
  const DenseMatrix t_refined = random_target(n_frames, cfg.k_actions, rng);

  const double kink_threshold = 50.0 * step;
  // FD truncation through a cosine scales like step^2 / norm^2; 0.01 keeps
  // it two orders below the tolerance.
  const double cosine_norm_threshold = 0.01;
  *min_relu_margin = std::numeric_limits<double>::infinity();
  {
    Rng probe_rng(0);
    ForwardPass probe = forward_embeddings(params, x, probe_rng, /*train_mode=*/false);
    *min_relu_margin = std::min(*min_relu_margin, probe.tape.min_abs_relu_input());
    if (*min_relu_margin <= kink_threshold) return results;
    if (probe.tape.min_cosine_norm() <= cosine_norm_threshold) {
      *min_relu_margin = 0.0;
      return results;
    }
  }

  auto model_tensors = [&](const std::vector<std::string>& names) {
    std::vector<DenseMatrix*> out;
    params.for_each_tensor([&](const std::string& name, DenseMatrix& t) {
      for (const auto& want : names)
        if (name == want) out.push_back(&t);
    });
    return out;
  };
  auto all_model_tensors = [&] {
    std::vector<DenseMatrix*> out;
    params.for_each_tensor([&](const std::string&, DenseMatrix& t) { out.push_back(&t); });
    return out;
  };
  auto model_component = [&](const std::string& name, std::vector<DenseMatrix*> tensors,
                             const std::function<int(ForwardPass&)>& loss_of) {
    Component comp;
    comp.name = name;
    comp.tensors = std::move(tensors);
    comp.eval = [&params, &x, loss_of] {
      Rng r(0);
      ForwardPass pass = forward_embeddings(params, x, r, /*train_mode=*/false);
      return pass.tape.value(loss_of(pass))(0, 0);
    };
    comp.analytic = [&params, &x, loss_of, &comp] {
      Rng r(0);
      ForwardPass pass = forward_embeddings(params, x, r, /*train_mode=*/false);
      const int loss = loss_of(pass);
      pass.tape.backward(loss);
      std::vector<DenseMatrix> out;
      params.for_each_tensor([&](const std::string& name, DenseMatrix& t) {
        for (DenseMatrix* want : comp.tensors) {
          if (want == &t) {
            const int id = pass.param_node.at(name);
            out.push_back(pass.tape.has_grad(id) ? pass.tape.grad(id)
                                                 : DenseMatrix(t.rows, t.cols, 0.0));
          }
        }
      });
      return out;
    };
    results.push_back(check_component(comp, tol, step, inject_error));
  };

  // Encoder alone (loss reads F before dispatch would matter: use frames and
  // restrict the wiggled tensors to the encoder stack).
  model_component("encoder", model_tensors({"enc_w1", "enc_b1", "enc_w2", "enc_b2"}),
                  [&](ForwardPass& pass) {
                    return pass.tape.weighted_sum(pass.frames, w_frames);
                  });
  model_component("dispatch",
                  model_tensors({"dispatch_alpha", "dispatch_beta", "actions"}),
                  [&](ForwardPass& pass) {
                    return pass.tape.weighted_sum(pass.frames, w_frames);
                  });

  // Self-attention sub-block on standalone leaves.
  {
    BlockFixture fix;
    Rng r = rng.fork(2);
    fix.tensors = {random_matrix(3, 4, r), random_matrix(4, 4, r, 0.5),
                   random_matrix(4, 4, r, 0.5), random_matrix(4, 4, r, 0.5),
                   random_matrix(4, 4, r, 0.5)};
    fix.loss_weights = random_matrix(3, 4, r, 0.5);
    fix.build = [&fix](Tape& tape) {
      std::vector<int> ids;
      for (auto& t : fix.tensors) ids.push_back(tape.leaf(t, true));
      const int out = mha_block(tape, ids[0], ids[0], {ids[1], ids[2], ids[3], ids[4]}, 2);
      return std::make_pair(tape.weighted_sum(out, fix.loss_weights), ids);
    };
    Component comp;
    comp.name = "self_attention";
    for (auto& t : fix.tensors) comp.tensors.push_back(&t);
    comp.eval = [&fix] { return fix.eval(); };
    comp.analytic = [&fix] { return fix.analytic(); };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  // Cross-attention: query stream and a separate key/value stream.
  {
    BlockFixture fix;
    Rng r = rng.fork(3);
    fix.tensors = {random_matrix(3, 4, r),      random_matrix(6, 4, r),
                   random_matrix(4, 4, r, 0.5), random_matrix(4, 4, r, 0.5),
                   random_matrix(4, 4, r, 0.5), random_matrix(4, 4, r, 0.5)};
    fix.loss_weights = random_matrix(3, 4, r, 0.5);
    fix.build = [&fix](Tape& tape) {
      std::vector<int> ids;
      for (auto& t : fix.tensors) ids.push_back(tape.leaf(t, true));
      const int out = mha_block(tape, ids[0], ids[1], {ids[2], ids[3], ids[4], ids[5]}, 2);
      return std::make_pair(tape.weighted_sum(out, fix.loss_weights), ids);
    };
    Component comp;
    comp.name = "cross_attention";
    for (auto& t : fix.tensors) comp.tensors.push_back(&t);
    comp.eval = [&fix] { return fix.eval(); };
    comp.analytic = [&fix] { return fix.analytic(); };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  // Layer norm with affine rescale, plus the feed-forward block.
  {
    BlockFixture fix;
    Rng r = rng.fork(4);
    fix.tensors = {random_matrix(5, 4, r),      random_matrix(1, 4, r, 0.5),
                   random_matrix(1, 4, r, 0.5), random_matrix(4, 8, r, 0.5),
                   random_matrix(1, 8, r, 0.5), random_matrix(8, 4, r, 0.5),
                   random_matrix(1, 4, r, 0.5)};
    fix.loss_weights = random_matrix(5, 4, r, 0.5);
    fix.build = [&fix](Tape& tape) {
      std::vector<int> ids;
      for (auto& t : fix.tensors) ids.push_back(tape.leaf(t, true));
      const int norm =
          tape.add_rowvec(tape.mul_rowvec(tape.layernorm_rows(ids[0]), ids[1]), ids[2]);
      const int ff = tape.add_rowvec(
          tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(norm, ids[3]), ids[4])), ids[5]),
          ids[6]);
      return std::make_pair(tape.weighted_sum(ff, fix.loss_weights), ids);
    };
    {
      Tape probe;
      auto [loss, ids] = fix.build(probe);
      (void)loss;
      (void)ids;
      *min_relu_margin = std::min(*min_relu_margin, probe.min_abs_relu_input());
      if (*min_relu_margin <= kink_threshold) return results;
    }
    Component comp;
    comp.name = "layernorm_ffn";
    for (auto& t : fix.tensors) comp.tensors.push_back(&t);
    comp.eval = [&fix] { return fix.eval(); };
    comp.analytic = [&fix] { return fix.analytic(); };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  // Refinement on standalone F and S leaves.
  {
    BlockFixture fix;
    Rng r = rng.fork(5);
    fix.tensors = {random_matrix(6, 4, r), random_matrix(3, 4, r)};
    fix.loss_weights = random_matrix(6, 4, r, 0.5);
    fix.build = [&fix](Tape& tape) {
      std::vector<int> ids;
      for (auto& t : fix.tensors) ids.push_back(tape.leaf(t, true));
      const double scale = 1.0 / (0.5 * std::sqrt(4.0));
      const int att = tape.softmax_rows(tape.scale_const(tape.matmul_nt(ids[0], ids[1]), scale));
      const int out = tape.add(ids[0], tape.matmul(att, ids[1]));
      return std::make_pair(tape.weighted_sum(out, fix.loss_weights), ids);
    };
    Component comp;
    comp.name = "refine";
    for (auto& t : fix.tensors) comp.tensors.push_back(&t);
    comp.eval = [&fix] { return fix.eval(); };
    comp.analytic = [&fix] { return fix.analytic(); };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  // Prediction head + cross-entropy against a fixed pseudo-label.
  {
    BlockFixture fix;
    Rng r = rng.fork(6);
    fix.tensors = {random_matrix(6, 4, r), random_matrix(3, 4, r)};
    DenseMatrix target = random_target(6, 3, r);
    fix.build = [&fix, target](Tape& tape) {
      std::vector<int> ids;
      for (auto& t : fix.tensors) ids.push_back(tape.leaf(t, true));
      const int p = tape.softmax_rows(tape.scale_const(tape.matmul_nt(ids[0], ids[1]), 1.0 / 0.5));
      return std::make_pair(tape.cross_entropy(p, target), ids);
    };
    Component comp;
    comp.name = "predict_loss";
    for (auto& t : fix.tensors) comp.tensors.push_back(&t);
    comp.eval = [&fix] { return fix.eval(); };
    comp.analytic = [&fix] { return fix.analytic(); };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  // End to end: Eq-13 style total loss with frozen targets, every tensor.
  model_component("end_to_end", all_model_tensors(), [&](ForwardPass& pass) {
    const int p = predict_node(pass, params, pass.frames);
    const int ps = predict_node(pass, params, pass.segments);
    const int pr = predict_node(pass, params, pass.refined);
    return add_losses(pass, {cross_entropy_node(pass, p, t_frames, 1.0),
                             cross_entropy_node(pass, ps, t_segments, 1.0),
                             cross_entropy_node(pass, pr, t_refined, 1.0)});
  });

  // Encoder with an active, frozen dropout mask (same seed every eval).
  {
    Component comp;
    comp.name = "dropout_mask";
    comp.tensors = model_tensors({"enc_w1", "enc_w2"});
    auto loss_of = [&](ForwardPass& pass) {
      return pass.tape.weighted_sum(pass.frames, w_frames);
    };
    comp.eval = [&params, &x, loss_of] {
      params.cfg.dropout = 0.5;
      Rng r(99);
      ForwardPass pass = forward_embeddings(params, x, r, /*train_mode=*/true);
      params.cfg.dropout = 0.0;
      return pass.tape.value(loss_of(pass))(0, 0);
    };
    comp.analytic = [&params, &x, loss_of, &comp] {
      params.cfg.dropout = 0.5;
      Rng r(99);
      ForwardPass pass = forward_embeddings(params, x, r, /*train_mode=*/true);
      params.cfg.dropout = 0.0;
      const int loss = loss_of(pass);
      pass.tape.backward(loss);
      std::vector<DenseMatrix> out;
      params.for_each_tensor([&](const std::string& name, DenseMatrix& t) {
        for (DenseMatrix* want : comp.tensors) {
          if (want == &t) {
            const int id = pass.param_node.at(name);
            out.push_back(pass.tape.has_grad(id) ? pass.tape.grad(id)
                                                 : DenseMatrix(t.rows, t.cols, 0.0));
          }
        }
      });
      return out;
    };
    results.push_back(check_component(comp, tol, step, inject_error));
  }

  return results;
}
}  // namespace

}  // namespace clot::model
