#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "cakd/experiments.hpp"

using cakd::ExperimentConfig;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string((std::istreambuf_iterator<char>(is)), {});
}

const char* kTinyConfig = R"(
# desk-scale smoke config
dataset = blobs
blobs.seed = 7
blobs.classes = 4
blobs.per_class = 20
blobs.test_per_class = 20
blobs.dim = 8
blobs.spread = 0.35
teacher.widths = 8,16,8,4
teacher.taps = 1,2
student.widths = 8,16,8,4
student.taps = 1,2
train.epochs = 2
train.batch_size = 32
train.base_lr = 0.1
train.warmup_epochs = 1
train.milestones =
seeds = 1,2
)";

}  // namespace

TEST_CASE("config parsing") {
  std::string text = kTinyConfig;
  ExperimentConfig cfg = cakd::parse_config_text(text);
  CHECK(cfg.dataset == "blobs");
  CHECK(cfg.blobs_classes == 4);
  CHECK(cfg.teacher.widths == std::vector<int>{8, 16, 8, 4});
  CHECK(cfg.student.tap_layers == std::vector<int>{1, 2});
  CHECK(cfg.train.epochs == 2);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2});

  CHECK_THROWS_AS(cakd::parse_config_text("bogus_key = 1"), std::invalid_argument);
  CHECK_THROWS_AS(cakd::parse_config_text("no equals sign"), std::invalid_argument);
  CHECK_THROWS_AS(cakd::parse_config_text("train.epochs = abc"), std::invalid_argument);
}

TEST_CASE("verify passes clean and fails under the corruption hook") {
  std::ostringstream clean;
  CHECK(cakd::run_verify(false, clean) == 0);
  CHECK(clean.str().find("verify: PASS") != std::string::npos);

  std::ostringstream corrupted;
  CHECK(cakd::run_verify(true, corrupted) == 1);
  CHECK(corrupted.str().find("decoupling-identity") != std::string::npos);
  CHECK(corrupted.str().find("verify: FAIL") != std::string::npos);

  // identical report bytes on repeated clean runs
  std::ostringstream again;
  cakd::run_verify(false, again);
  CHECK(clean.str() == again.str());
}

TEST_CASE("metrics csv round trip") {
  cakd::MetricsRecord r;
  r.run_id = "demo";
  r.seed = 3;
  r.epoch = 7;
  r.split = "test";
  r.accuracy = 0.875;
  r.ce = 0.321;
  r.logit_kl = 0.0123;
  r.ps_pw = 2.5;

  const std::string path =
      (std::filesystem::temp_directory_path() / "cakd_metrics.csv").string();
  cakd::write_metrics_csv(path, {r});
  const auto rows = cakd::read_metrics_csv(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].run_id == "demo");
  CHECK(rows[0].accuracy == 0.875);
  CHECK(rows[0].logit_kl == 0.0123);
  CHECK(cakd::metrics_csv_row(rows[0]) == cakd::metrics_csv_row(r));
  std::remove(path.c_str());
}

TEST_CASE("train-teacher and distill commands write outputs") {
  const std::string dir = temp_dir("cakd_cmd_test");
  ExperimentConfig cfg = cakd::parse_config_text(kTinyConfig);
  cfg.output_dir = dir;

  cakd::run_train_teacher(cfg);
  CHECK(std::filesystem::exists(dir + "/teacher.ckpt"));
  CHECK(std::filesystem::exists(dir + "/teacher_metrics.csv"));

  cakd::run_distill(cfg, dir + "/teacher.ckpt", "kd");
  CHECK(std::filesystem::exists(dir + "/distill_kd_seed1.csv"));
  CHECK(std::filesystem::exists(dir + "/distill_kd_seed2.ckpt"));

  SUBCASE("rerunning yields byte-identical outputs") {
    const std::string before = read_file(dir + "/distill_kd_seed1.csv");
    const std::string ckpt_before = read_file(dir + "/distill_kd_seed1.ckpt");
    cakd::run_distill(cfg, dir + "/teacher.ckpt", "kd");
    CHECK(read_file(dir + "/distill_kd_seed1.csv") == before);
    CHECK(read_file(dir + "/distill_kd_seed1.ckpt") == ckpt_before);
  }

  SUBCASE("wrong-class-count teacher is rejected") {
    ExperimentConfig other = cfg;
    other.blobs_classes = 5;
    other.blobs_dim = 8;
    other.teacher.widths = {8, 16, 8, 5};
    other.student.widths = {8, 16, 8, 5};
    other.output_dir = dir + "/other";
    cakd::run_train_teacher(other);
    CHECK_THROWS_AS(cakd::run_distill(cfg, dir + "/other/teacher.ckpt", "kd"),
                    cakd::FormatError);
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("report aggregates seed accuracies") {
  const std::string dir = temp_dir("cakd_report_test");
  std::vector<cakd::MetricsRecord> rows;
  for (int seed = 1; seed <= 2; ++seed) {
    cakd::MetricsRecord r;
    r.run_id = "run";
    r.seed = seed;
    r.epoch = 3;
    r.split = "test";
    r.accuracy = seed == 1 ? 0.90 : 0.92;
    rows.push_back(r);
  }
  cakd::write_metrics_csv(dir + "/m.csv", rows);
  cakd::run_report({dir + "/m.csv"}, dir + "/report");

  const std::string summary = read_file(dir + "/report_summary.csv");
  CHECK(summary.find("run,mean,0.91,0.0141") != std::string::npos);
  CHECK(summary.find("run,1,0.9,") != std::string::npos);
  CHECK(std::filesystem::exists(dir + "/report_series.csv"));

  CHECK_THROWS_AS(cakd::run_report({}, dir + "/r"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ablation csv has the expected shape") {
  const std::string dir = temp_dir("cakd_ablate_test");
  ExperimentConfig cfg = cakd::parse_config_text(kTinyConfig);
  cfg.output_dir = dir;
  cfg.train.epochs = 1;
  cfg.seeds = {1, 2};

  cakd::run_ablate(cfg, "alpha-beta");
  const std::string csv = read_file(dir + "/ablate_alpha-beta.csv");
  std::istringstream is(csv);
  std::string line;
  int rows = 0, mean_rows = 0;
  CHECK(std::getline(is, line));
  CHECK(line == "sweep,setting,seed,accuracy,ps_pw");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.find(",mean,") != std::string::npos) ++mean_rows;
  }
  CHECK(rows == 5 * 2 + 5);  // 5 settings x 2 seeds + 5 mean rows
  CHECK(mean_rows == 5);

  CHECK_THROWS_AS(cakd::run_ablate(cfg, "nonsense"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss-ratio calibration is self-consistent") {
  ExperimentConfig cfg = cakd::parse_config_text(kTinyConfig);
  auto [train_set, test_set] = cakd::load_datasets(cfg);

  cakd::Mlp teacher(cfg.teacher);
  teacher.init(2);
  cakd::Mlp student(cfg.student);
  student.init(3);

  for (double target : {0.2, 0.5, 1.0, 2.0, 5.0}) {
    const double gamma = cakd::calibrate_gamma_feature(
        teacher, student, train_set, cfg.train.loss, target, 32);

    // recompute the measured ratio with the calibrated gamma
    cakd::LossConfig loss = cfg.train.loss;
    loss.gamma_feature.assign(cfg.student.tap_layers.size(), gamma);
    std::vector<cakd::Vec> inputs(train_set.inputs.begin(),
                                  train_set.inputs.begin() + 32);
    std::vector<int> targets(train_set.labels.begin(),
                             train_set.labels.begin() + 32);
    const auto t = teacher.forward_with_taps(inputs);
    const auto s = student.forward_with_taps(inputs);
    const auto bl = cakd::cakd_total(t, s, targets, loss);
    double feature_loss = 0.0;
    for (size_t site = 1; site < bl.breakdown.size(); ++site) {
      feature_loss += gamma * bl.breakdown[site].weighted_total;
    }
    const double logit_loss = loss.gamma_logit * bl.breakdown[0].weighted_total;
    CHECK(feature_loss / logit_loss == doctest::Approx(target).epsilon(0.05));
  }
}
