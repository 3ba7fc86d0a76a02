#include "clot/model/adam.hpp"

#include <cmath>

namespace clot::model {

void AdamState::init_like(const ModelParams& params) {
  m.clear();
  v.clear();
  step = 0;
  params.for_each_tensor([&](const std::string&, const DenseMatrix& t) {
    m.emplace_back(t.rows, t.cols, 0.0);
    v.emplace_back(t.rows, t.cols, 0.0);
  });
}

void adam_step(ModelParams& params, const GradientStore& grads, AdamState& state) {
  if (state.m.size() != grads.grads.size())
    throw DimensionError("adam_step: state does not match gradient layout");
  ++state.step;
  const AdamConfig& cfg = state.cfg;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  std::size_t idx = 0;
  params.for_each_tensor([&](const std::string& name, DenseMatrix& theta) {
    const DenseMatrix& g = grads.grads[idx];
    if (!theta.same_shape(g)) throw DimensionError("adam_step: gradient shape mismatch");
    DenseMatrix& m = state.m[idx];
    DenseMatrix& v = state.v[idx];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      theta.data[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps)) +
                       cfg.lr * cfg.weight_decay * theta.data[i];
    }
    ensure_finite(theta, name.c_str());
    ++idx;
  });
}

}  // namespace clot::model
