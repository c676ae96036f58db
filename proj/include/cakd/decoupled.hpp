#pragma once

#include <vector>

#include "cakd/partition.hpp"
#include "cakd/prob.hpp"

namespace cakd {

// Component breakdown of one teacher/student pair at one distillation site.
// The invariant plain_kl == bcd + p_s_teacher*scd + p_w_teacher*wcd holds
// for every instance produced by decouple().
struct DecoupledKL {
  double bcd = 0.0;
  double scd = 0.0;
  double wcd = 0.0;
  double p_s_teacher = 0.0;
  double p_w_teacher = 0.0;
  double plain_kl = 0.0;
  double weighted_total = 0.0;
};

struct LossConfig {
  double alpha = 8.0;             // SCD weight
  double beta = 2.0;              // WCD weight
  double temperature = 4.0;
  double hard_label_weight = 1.0;
  double gamma_logit = 1.0;
  std::vector<double> gamma_feature;  // one per feature tap
  std::vector<int> feature_k;         // strong-cluster size per feature tap
  // When set, alpha/beta are replaced per-sample by p_s^T/p_w^T, which
  // collapses the weighted loss back to plain KL (vanilla KD).
  bool recover_plain_kd = false;
  // Multiply distillation terms by T^2 so gradients stay comparable across
  // temperatures.
  bool temperature_squared_scaling = true;
};

// Raw values at every distillation site for a batch:
// logits[sample][class], taps[site][sample][width].
struct TapActivations {
  std::vector<Vec> logits;
  std::vector<std::vector<Vec>> taps;
};

struct BatchLoss {
  double total = 0.0;
  double ce = 0.0;
  // breakdown[0] is the logit site, followed by one entry per feature tap;
  // each entry holds batch means.
  std::vector<DecoupledKL> breakdown;
};

double bcd(const BinaryProb& teacher, const BinaryProb& student);
double scd(const Vec& strong_teacher, const Vec& strong_student);
double wcd(const Vec& weak_teacher, const Vec& weak_student);

// Full decomposition at one site with a teacher-defined partition.
DecoupledKL decouple(const Vec& f_teacher, const Vec& f_student,
                     const Partition& part, const LossConfig& cfg);

// Single-ground-truth specialization: S = {target}, scd is identically 0.
DecoupledKL decouple_single_label(const Vec& f_teacher, const Vec& f_student,
                                  int target, const LossConfig& cfg);

// Analytic gradient of weighted_total with respect to the student raw values.
Vec grad_student(const Vec& f_teacher, const Vec& f_student,
                 const Partition& part, const LossConfig& cfg);

// Global batch loss: hard-label CE + decoupled logit loss + decoupled losses
// at every feature tap (teacher-defined top-k partitions).
BatchLoss cakd_total(const TapActivations& teacher, const TapActivations& student,
                     const std::vector<int>& targets, const LossConfig& cfg);

// Cross entropy of raw logits against an integer label, T = 1.
double cross_entropy(const Vec& logits, int target);

// Teacher-defined top-k partition for feature tap `site`, using
// cfg.feature_k when set and ceil(width/4) otherwise.
Partition feature_partition(const Vec& teacher_tap, const LossConfig& cfg,
                            size_t site);

}  // namespace cakd
