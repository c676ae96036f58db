#include "cakd/sgd.hpp"

#include <stdexcept>

namespace cakd {

double LrSchedule::lr_at(int epoch) const {
  if (warmup_epochs > 0 && epoch < warmup_epochs) {
    return base_lr * static_cast<double>(epoch + 1) /
           static_cast<double>(warmup_epochs);
  }
  double lr = base_lr;
  for (int m : milestones) {
    if (epoch >= m) lr *= decay_factor;
  }
  return lr;
}

void SgdState::attach(const Mlp& model) {
  vw.clear();
  vb.clear();
  for (size_t l = 0; l < model.weights().size(); ++l) {
    vw.emplace_back(model.weights()[l].rows, model.weights()[l].cols);
    vb.emplace_back(model.biases()[l].size(), 0.0);
  }
}

void sgd_step(SgdState& state, Mlp& model, const Gradients& grads, int epoch) {
  if (state.vw.size() != model.weights().size()) {
    throw std::invalid_argument("sgd_step: state not attached to this model");
  }
  const double lr = state.schedule.lr_at(epoch);
  for (size_t l = 0; l < model.weights().size(); ++l) {
    auto& w = model.weights()[l].a;
    const auto& dw = grads.dw[l].a;
    auto& vw = state.vw[l].a;
    for (size_t i = 0; i < w.size(); ++i) {
      vw[i] = state.momentum * vw[i] + dw[i] + state.weight_decay * w[i];
      w[i] -= lr * vw[i];
    }
    auto& b = model.biases()[l];
    const auto& db = grads.db[l];
    auto& vb = state.vb[l];
    for (size_t i = 0; i < b.size(); ++i) {
      vb[i] = state.momentum * vb[i] + db[i] + state.weight_decay * b[i];
      b[i] -= lr * vb[i];
    }
  }
}

}  // namespace cakd
