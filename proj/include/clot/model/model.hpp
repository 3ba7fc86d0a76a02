#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "clot/matrix.hpp"
#include "clot/model/tape.hpp"
#include "clot/rng.hpp"

namespace clot::model {

struct ModelConfig {
  std::size_t input_dim = 16;   // D
  std::size_t hidden_dim = 128; // encoder hidden width
  std::size_t embed_dim = 64;   // d
  std::size_t dec_dim = 64;     // d_dec
  std::size_t k_actions = 4;    // K
  std::size_t k_queries = 4;    // K' = K + nseg, clamped to >= 1
  std::size_t layers = 2;       // decoder depth L
  std::size_t heads = 8;
  double tau = 1.0;             // softmax temperature (fixed, not learned)
  double dropout = 0.5;
  bool detach_s_in_refine = false;
};

struct DecoderLayerParams {
  DenseMatrix ln1_g, ln1_b;
  DenseMatrix sa_wq, sa_wk, sa_wv, sa_wo;
  DenseMatrix ln2_g, ln2_b;
  DenseMatrix ca_wq, ca_wk, ca_wv, ca_wo;
  DenseMatrix ln3_g, ln3_b;
  DenseMatrix ff_w1, ff_b1, ff_w2, ff_b2;
};

// Every learnable tensor, plus the fixed config. Tensor iteration order is
// the canonical order for gradients, Adam state and checkpoints.
struct ModelParams {
  ModelConfig cfg;
  DenseMatrix enc_w1, enc_b1, enc_w2, enc_b2;
  DenseMatrix dispatch_alpha, dispatch_beta;  // 1x1 scalars
  DenseMatrix queries;                        // K' x d_dec
  std::vector<DecoderLayerParams> decoder;
  DenseMatrix final_ln_g, final_ln_b;
  DenseMatrix out_proj;  // d_dec x d
  DenseMatrix actions;   // K x d

  static ModelParams init(const ModelConfig& cfg, Rng& rng);

  void for_each_tensor(const std::function<void(const std::string&, DenseMatrix&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const DenseMatrix&)>& fn) const;
  std::size_t tensor_count() const;
};

struct GradientStore {
  std::vector<std::string> names;
  std::vector<DenseMatrix> grads;

  void init_like(const ModelParams& params);
  void zero();
  DenseMatrix* find(const std::string& name);
  void add_from(const GradientStore& other);  // accumulate, fixed order
};

// One taped forward pass: frame embeddings F (encode + dispatch), segment
// embeddings S (parallel decoder), refined embeddings F_R (cross-attention).
// Prediction heads and losses are attached on the same tape afterwards.
struct ForwardPass {
  Tape tape;
  int x_in = -1;
  int frames = -1;    // F, N x d
  int segments = -1;  // S, K' x d
  int refined = -1;   // F_R, N x d
  std::unordered_map<std::string, int> param_node;
  bool train_mode = false;
};

ForwardPass forward_embeddings(ModelParams& params, const DenseMatrix& x, Rng& rng,
                               bool train_mode);

// softmax(h * A^T / tau) on the pass's tape; h_node is frames/segments/refined.
int predict_node(ForwardPass& pass, const ModelParams& params, int h_node);

// -sum t.log(p) scaled by `scale`, as a tape node (target enters detached).
int cross_entropy_node(ForwardPass& pass, int p_node, const DenseMatrix& target, double scale);

int add_losses(ForwardPass& pass, const std::vector<int>& losses);

// Runs backward from loss_node and accumulates parameter gradients.
void backward_accumulate(ForwardPass& pass, ModelParams& params, int loss_node,
                         GradientStore& store);

// Standalone heads used outside training (plain matrices, no tape).
DenseMatrix predict(const DenseMatrix& h, const DenseMatrix& actions, double tau);
double cross_entropy_loss(const DenseMatrix& p, const DenseMatrix& t);
DenseMatrix refine_values(const DenseMatrix& f, const DenseMatrix& s, double tau);
DenseMatrix encode_values(const ModelParams& params, const DenseMatrix& x);
DenseMatrix dispatch_values(const DenseMatrix& f, const DenseMatrix& actions, double alpha,
                            double beta);

}  // namespace clot::model
