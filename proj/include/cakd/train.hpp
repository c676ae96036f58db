#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cakd/data.hpp"
#include "cakd/decoupled.hpp"
#include "cakd/mlp.hpp"
#include "cakd/sgd.hpp"

namespace cakd {

enum class DistillMode { CeOnly, Kd, CakdLogit, CakdFeature, CakdFull };

DistillMode parse_mode(const std::string& name);
std::string mode_name(DistillMode mode);

struct TrainConfig {
  int epochs = 60;
  int batch_size = 128;
  std::uint64_t seed = 1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LrSchedule schedule;
  LossConfig loss;
};

struct MetricsRecord {
  std::string run_id;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string split;
  double accuracy = 0.0;
  double ce = 0.0;
  double logit_bcd = 0.0, logit_scd = 0.0, logit_wcd = 0.0, logit_kl = 0.0;
  double feat_bcd = 0.0, feat_scd = 0.0, feat_wcd = 0.0, feat_kl = 0.0;
  double ps_pw = 0.0;
};

struct TrainResult {
  Mlp model;
  std::vector<MetricsRecord> metrics;
};

// Train a model from scratch. teacher must be present for any mode other
// than CeOnly; it stays frozen and its tap sites must match the student's
// in count and width. Deterministic for fixed (config, seed, data).
TrainResult train(const MlpSpec& spec, const Dataset& train_set,
                  const Dataset& test_set, const TrainConfig& cfg,
                  DistillMode mode, const Mlp* teacher,
                  const std::string& run_id);

double evaluate_accuracy(const Mlp& model, const Dataset& data);

// Effective per-mode loss configuration (which sites are active, whether the
// recovery weighting is forced).
LossConfig mode_loss_config(const LossConfig& base, DistillMode mode,
                            size_t tap_sites);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRecord>& rows);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace cakd
