#pragma once

#include <vector>

#include "cakd/mlp.hpp"

namespace cakd {

struct LrSchedule {
  double base_lr = 0.05;
  int warmup_epochs = 5;
  std::vector<int> milestones = {37, 45, 52};
  double decay_factor = 0.1;

  // Linear warmup from 0 over warmup_epochs, then base_lr divided by
  // decay_factor^-1 at every passed milestone.
  double lr_at(int epoch) const;
};

struct SgdState {
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule schedule;
  std::vector<Mat> vw;
  std::vector<Vec> vb;

  void attach(const Mlp& model);
};

// v <- momentum*v + grad + weight_decay*param; param <- param - lr(epoch)*v
void sgd_step(SgdState& state, Mlp& model, const Gradients& grads, int epoch);

}  // namespace cakd
