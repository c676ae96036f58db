#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cakd/data.hpp"
#include "cakd/train.hpp"

namespace cakd {

struct ExperimentConfig {
  // dataset: blobs | idx | csv
  std::string dataset = "blobs";
  std::uint64_t blobs_seed = 7;
  int blobs_classes = 4;
  int blobs_per_class = 80;
  int blobs_test_per_class = 400;
  int blobs_dim = 8;
  double blobs_spread = 0.2;
  std::string idx_train_images, idx_train_labels;
  std::string idx_test_images, idx_test_labels;
  std::string csv_train, csv_test;

  MlpSpec teacher;
  MlpSpec student;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = ".";
};

// Flat key-value config file, '#' comments. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

// Train/test pair per the config's dataset block.
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg);

// Property suite over the decoupling math; returns the process exit status.
// inject_corruption is a test hook that perturbs the identity check so the
// failure path can be exercised.
int run_verify(bool inject_corruption, std::ostream& out);

// CE-only training of the teacher spec with the first seed. Writes
// teacher.ckpt and teacher_metrics.csv under cfg.output_dir.
void run_train_teacher(const ExperimentConfig& cfg);

// One distillation run per seed against a frozen teacher checkpoint. Writes
// distill_<mode>_seed<S>.ckpt / .csv under cfg.output_dir.
void run_distill(const ExperimentConfig& cfg, const std::string& teacher_path,
                 const std::string& mode);

// Sweeps: alpha-beta | loss-ratio | components. Writes
// ablate_<sweep>.csv under cfg.output_dir.
void run_ablate(const ExperimentConfig& cfg, const std::string& sweep);

// Aggregates metrics files into <out_prefix>_summary.csv and
// <out_prefix>_series.csv.
void run_report(const std::vector<std::string>& metrics_files,
                const std::string& out_prefix);

// Solves for a uniform gamma_feature so that the measured feature/logit loss
// ratio on the given batch equals `target`. Used by the loss-ratio sweep.
double calibrate_gamma_feature(const Mlp& teacher, const Mlp& student,
                               const Dataset& data, const LossConfig& cfg,
                               double target, int batch_size);

}  // namespace cakd
