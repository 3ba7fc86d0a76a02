#include "clot/model/model.hpp"

#include <cmath>

#include "clot/kernels/kernels.hpp"
#include "clot/reduce.hpp"

namespace clot::model {
namespace {

DenseMatrix glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix w(rows, cols);
  const double scale = std::sqrt(2.0 / static_cast<double>(rows + cols));
  for (double& v : w.data) v = rng.normal() * scale;
  return w;
}

DenseMatrix small_normal(std::size_t rows, std::size_t cols, Rng& rng, double scale = 0.02) {
  DenseMatrix w(rows, cols);
  for (double& v : w.data) v = rng.normal() * scale;
  return w;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
  if (cfg.heads < 1 || cfg.dec_dim % cfg.heads != 0)
    throw ParamError("ModelParams: dec_dim must be divisible by heads");
  if (cfg.k_queries < 1) throw ParamError("ModelParams: k_queries must be >= 1");
  if (!(cfg.tau > 0.0)) throw ParamError("ModelParams: tau must be positive");

  ModelParams p;
  p.cfg = cfg;
  p.enc_w1 = glorot(cfg.input_dim, cfg.hidden_dim, rng);
  p.enc_b1 = DenseMatrix(1, cfg.hidden_dim, 0.0);
  p.enc_w2 = glorot(cfg.hidden_dim, cfg.embed_dim, rng);
  p.enc_b2 = DenseMatrix(1, cfg.embed_dim, 0.0);
  p.dispatch_alpha = DenseMatrix(1, 1, 1.0);
  p.dispatch_beta = DenseMatrix(1, 1, 0.0);
  p.queries = small_normal(cfg.k_queries, cfg.dec_dim, rng);
  p.decoder.resize(cfg.layers);
  for (auto& layer : p.decoder) {
    layer.ln1_g = DenseMatrix(1, cfg.dec_dim, 1.0);
    layer.ln1_b = DenseMatrix(1, cfg.dec_dim, 0.0);
    layer.sa_wq = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.sa_wk = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.sa_wv = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.sa_wo = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.ln2_g = DenseMatrix(1, cfg.dec_dim, 1.0);
    layer.ln2_b = DenseMatrix(1, cfg.dec_dim, 0.0);
    layer.ca_wq = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.ca_wk = glorot(cfg.embed_dim, cfg.dec_dim, rng);
    layer.ca_wv = glorot(cfg.embed_dim, cfg.dec_dim, rng);
    layer.ca_wo = glorot(cfg.dec_dim, cfg.dec_dim, rng);
    layer.ln3_g = DenseMatrix(1, cfg.dec_dim, 1.0);
    layer.ln3_b = DenseMatrix(1, cfg.dec_dim, 0.0);
    layer.ff_w1 = glorot(cfg.dec_dim, 4 * cfg.dec_dim, rng);
    layer.ff_b1 = DenseMatrix(1, 4 * cfg.dec_dim, 0.0);
    layer.ff_w2 = glorot(4 * cfg.dec_dim, cfg.dec_dim, rng);
    layer.ff_b2 = DenseMatrix(1, cfg.dec_dim, 0.0);
  }
  p.final_ln_g = DenseMatrix(1, cfg.dec_dim, 1.0);
  p.final_ln_b = DenseMatrix(1, cfg.dec_dim, 0.0);
  // Zero output projection: S = 0 at step 0, refine is exactly the identity
  // and the stage-3 pseudo-labels start from the stage-1 ones instead of
  // feeding decoder noise back into the loop. The segment prediction head
  // still carries gradient, so out_proj moves off zero in the first step.
  p.out_proj = DenseMatrix(cfg.dec_dim, cfg.embed_dim, 0.0);
  // Placeholder until k-means centroids land; unit-ish norms keep the
  // dispatch cosine well-conditioned in the meantime.
  p.actions = small_normal(cfg.k_actions, cfg.embed_dim, rng, 0.5);
  return p;
}

namespace {

template <typename Self, typename Fn>
void visit_tensors(Self& p, Fn&& fn) {
  fn("enc_w1", p.enc_w1);
  fn("enc_b1", p.enc_b1);
  fn("enc_w2", p.enc_w2);
  fn("enc_b2", p.enc_b2);
  fn("dispatch_alpha", p.dispatch_alpha);
  fn("dispatch_beta", p.dispatch_beta);
  fn("queries", p.queries);
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    auto& layer = p.decoder[l];
    const std::string prefix = "dec" + std::to_string(l) + "_";
    fn(prefix + "ln1_g", layer.ln1_g);
    fn(prefix + "ln1_b", layer.ln1_b);
    fn(prefix + "sa_wq", layer.sa_wq);
    fn(prefix + "sa_wk", layer.sa_wk);
    fn(prefix + "sa_wv", layer.sa_wv);
    fn(prefix + "sa_wo", layer.sa_wo);
    fn(prefix + "ln2_g", layer.ln2_g);
    fn(prefix + "ln2_b", layer.ln2_b);
    fn(prefix + "ca_wq", layer.ca_wq);
    fn(prefix + "ca_wk", layer.ca_wk);
    fn(prefix + "ca_wv", layer.ca_wv);
    fn(prefix + "ca_wo", layer.ca_wo);
    fn(prefix + "ln3_g", layer.ln3_g);
    fn(prefix + "ln3_b", layer.ln3_b);
    fn(prefix + "ff_w1", layer.ff_w1);
    fn(prefix + "ff_b1", layer.ff_b1);
    fn(prefix + "ff_w2", layer.ff_w2);
    fn(prefix + "ff_b2", layer.ff_b2);
  }
  fn("final_ln_g", p.final_ln_g);
  fn("final_ln_b", p.final_ln_b);
  fn("out_proj", p.out_proj);
  fn("actions", p.actions);
}

}  // namespace

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, DenseMatrix&)>& fn) {
  visit_tensors(*this, fn);
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, const DenseMatrix&)>& fn) const {
  visit_tensors(*this, fn);
}

std::size_t ModelParams::tensor_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const DenseMatrix&) { ++n; });
  return n;
}

void GradientStore::init_like(const ModelParams& params) {
  names.clear();
  grads.clear();
  params.for_each_tensor([&](const std::string& name, const DenseMatrix& t) {
    names.push_back(name);
    grads.emplace_back(t.rows, t.cols, 0.0);
  });
}

void GradientStore::zero() {
  for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
}

DenseMatrix* GradientStore::find(const std::string& name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return &grads[i];
  return nullptr;
}

void GradientStore::add_from(const GradientStore& other) {
  if (grads.size() != other.grads.size()) throw DimensionError("GradientStore: layout mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    add_scaled_inplace(grads[i], other.grads[i], 1.0);
}

namespace {

// Multi-head attention: softmax(Qh Kh^T / sqrt(dh)) Vh per head, heads
// concatenated and projected by wo. No biases on the projections.
int multi_head_attention(Tape& tape, int q_in, int kv_in, int wq, int wk, int wv, int wo,
                         std::size_t heads) {
  const std::size_t dec_dim = tape.value(wq).cols;
  if (heads < 1 || dec_dim % heads != 0)
    throw ParamError("attention: dec_dim must be divisible by heads");
  const std::size_t dh = dec_dim / heads;
  const int q = tape.matmul(q_in, wq);
  const int k = tape.matmul(kv_in, wk);
  const int v = tape.matmul(kv_in, wv);
  std::vector<int> outs;
  outs.reserve(heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t h = 0; h < heads; ++h) {
    const int qh = tape.slice_cols(q, h * dh, (h + 1) * dh);
    const int kh = tape.slice_cols(k, h * dh, (h + 1) * dh);
    const int vh = tape.slice_cols(v, h * dh, (h + 1) * dh);
    const int logits = tape.scale_const(tape.matmul_nt(qh, kh), inv_sqrt);
    outs.push_back(tape.matmul(tape.softmax_rows(logits), vh));
  }
  return tape.matmul(tape.concat_cols(outs), wo);
}

int layernorm_affine(Tape& tape, int x, int gain, int bias) {
  return tape.add_rowvec(tape.mul_rowvec(tape.layernorm_rows(x), gain), bias);
}

DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  DenseMatrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);  // inverted dropout
  for (double& v : mask.data) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

ForwardPass forward_embeddings(ModelParams& params, const DenseMatrix& x, Rng& rng,
                               bool train_mode) {
  const ModelConfig& cfg = params.cfg;
  if (x.cols != cfg.input_dim) throw DimensionError("forward: input feature dim disagrees");

  ForwardPass pass;
  pass.train_mode = train_mode;
  Tape& tape = pass.tape;
  params.for_each_tensor([&](const std::string& name, DenseMatrix& t) {
    pass.param_node[name] = tape.leaf(t, /*requires_grad=*/true);
  });
  auto node = [&](const char* name) { return pass.param_node.at(name); };

  pass.x_in = tape.constant(x);

  // Encoder: one hidden ReLU layer, dropout after the activation.
  int h = tape.relu(tape.add_rowvec(tape.matmul(pass.x_in, node("enc_w1")), node("enc_b1")));
  if (train_mode && cfg.dropout > 0.0)
    h = tape.hadamard_const(h, dropout_mask(x.rows, cfg.hidden_dim, cfg.dropout, rng));
  const int f0 = tape.add_rowvec(tape.matmul(h, node("enc_w2")), node("enc_b2"));

  // Feature dispatching: F = F0 + (1/K) * sigmoid(beta + alpha*cos(F0,A)) A.
  const int phi = tape.sigmoid(tape.add_scalar(
      tape.mul_scalar(tape.cosine_nt(f0, node("actions")), node("dispatch_alpha")),
      node("dispatch_beta")));
  pass.frames = tape.add(
      f0, tape.scale_const(tape.matmul(phi, node("actions")),
                           1.0 / static_cast<double>(cfg.k_actions)));

  // Parallel decoder over the query stream, pre-norm residual blocks.
  int q = node("queries");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string prefix = "dec" + std::to_string(l) + "_";
    auto lp = [&](const char* suffix) { return pass.param_node.at(prefix + suffix); };
    const int u1 = layernorm_affine(tape, q, lp("ln1_g"), lp("ln1_b"));
    q = tape.add(q, multi_head_attention(tape, u1, u1, lp("sa_wq"), lp("sa_wk"), lp("sa_wv"),
                                         lp("sa_wo"), cfg.heads));
    const int u2 = layernorm_affine(tape, q, lp("ln2_g"), lp("ln2_b"));
    q = tape.add(q, multi_head_attention(tape, u2, pass.frames, lp("ca_wq"), lp("ca_wk"),
                                         lp("ca_wv"), lp("ca_wo"), cfg.heads));
    const int u3 = layernorm_affine(tape, q, lp("ln3_g"), lp("ln3_b"));
    const int ff = tape.add_rowvec(
        tape.matmul(tape.relu(tape.add_rowvec(tape.matmul(u3, lp("ff_w1")), lp("ff_b1"))),
                    lp("ff_w2")),
        lp("ff_b2"));
    q = tape.add(q, ff);
  }
  pass.segments = tape.matmul(layernorm_affine(tape, q, node("final_ln_g"), node("final_ln_b")),
                              node("out_proj"));

  // Refinement: F_R = F + softmax(F S^T / (tau sqrt(d))) S.
  const int s_for_refine =
      cfg.detach_s_in_refine ? tape.constant(tape.value(pass.segments)) : pass.segments;
  const double att_scale = 1.0 / (cfg.tau * std::sqrt(static_cast<double>(cfg.embed_dim)));
  const int att = tape.softmax_rows(
      tape.scale_const(tape.matmul_nt(pass.frames, s_for_refine), att_scale));
  pass.refined = tape.add(pass.frames, tape.matmul(att, s_for_refine));
  return pass;
}

int predict_node(ForwardPass& pass, const ModelParams& params, int h_node) {
  Tape& tape = pass.tape;
  const int logits = tape.scale_const(tape.matmul_nt(h_node, pass.param_node.at("actions")),
                                      1.0 / params.cfg.tau);
  return tape.softmax_rows(logits);
}

int cross_entropy_node(ForwardPass& pass, int p_node, const DenseMatrix& target, double scale) {
  const int ce = pass.tape.cross_entropy(p_node, target);
  return scale == 1.0 ? ce : pass.tape.scale_const(ce, scale);
}

int add_losses(ForwardPass& pass, const std::vector<int>& losses) {
  if (losses.empty()) throw StateError("add_losses: nothing to sum");
  int acc = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) acc = pass.tape.add(acc, losses[i]);
  return acc;
}

void backward_accumulate(ForwardPass& pass, ModelParams& params, int loss_node,
                         GradientStore& store) {
  if (loss_node < 0) throw StateError("backward before forward");
  pass.tape.backward(loss_node);
  params.for_each_tensor([&](const std::string& name, DenseMatrix&) {
    const int id = pass.param_node.at(name);
    if (pass.tape.has_grad(id)) {
      DenseMatrix* dst = store.find(name);
      if (dst) add_scaled_inplace(*dst, pass.tape.grad(id), 1.0);
    }
  });
}

DenseMatrix predict(const DenseMatrix& h, const DenseMatrix& actions, double tau) {
  if (!(tau > 0.0)) throw ParamError("predict: tau must be positive");
  return clot::softmax_rows(matmul_nt(h, actions), tau);
}

double cross_entropy_loss(const DenseMatrix& p, const DenseMatrix& t) {
  if (!p.same_shape(t)) throw DimensionError("cross_entropy_loss: shape mismatch");
  constexpr double clamp = 1e-12;
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (t.data[i] != 0.0) loss -= t.data[i] * std::log(p.data[i] > clamp ? p.data[i] : clamp);
  }
  return loss;
}

DenseMatrix refine_values(const DenseMatrix& f, const DenseMatrix& s, double tau) {
  if (!(tau > 0.0)) throw ParamError("refine: tau must be positive");
  if (f.cols != s.cols) throw DimensionError("refine: embedding dims disagree");
  const double att_scale = 1.0 / (tau * std::sqrt(static_cast<double>(f.cols)));
  const DenseMatrix att = clot::softmax_rows(scaled(matmul_nt(f, s), att_scale), 1.0);
  DenseMatrix out = matmul(att, s);
  add_scaled_inplace(out, f, 1.0);
  return out;
}

DenseMatrix encode_values(const ModelParams& params, const DenseMatrix& x) {
  if (x.cols != params.cfg.input_dim) throw DimensionError("encode: input dim disagrees");
  DenseMatrix h = matmul(x, params.enc_w1);
  for (std::size_t i = 0; i < h.rows; ++i)
    kernels::ops().axpy(1.0, params.enc_b1.row(0), h.row(i), h.cols);
  for (double& v : h.data) v = v > 0.0 ? v : 0.0;
  DenseMatrix f = matmul(h, params.enc_w2);
  for (std::size_t i = 0; i < f.rows; ++i)
    kernels::ops().axpy(1.0, params.enc_b2.row(0), f.row(i), f.cols);
  return f;
}

DenseMatrix dispatch_values(const DenseMatrix& f, const DenseMatrix& actions, double alpha,
                            double beta) {
  if (f.cols != actions.cols) throw DimensionError("dispatch: embedding dims disagree");
  const DenseMatrix cos = cosine_matrix(f, actions);
  DenseMatrix phi(cos.rows, cos.cols);
  for (std::size_t i = 0; i < cos.size(); ++i)
    phi.data[i] = 1.0 / (1.0 + std::exp(-(beta + alpha * cos.data[i])));
  DenseMatrix out = matmul(phi, actions);
  const double inv_k = 1.0 / static_cast<double>(actions.rows);
  for (double& v : out.data) v *= inv_k;
  add_scaled_inplace(out, f, 1.0);
  return out;
}

}  // namespace clot::model
