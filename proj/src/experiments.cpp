#include "cakd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace cakd {

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& c : split_list(s)) out.push_back(std::stoi(c));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& c : split_list(s)) out.push_back(std::stod(c));
  return out;
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::invalid_argument("config: unknown activation " + s);
}

void apply_key(ExperimentConfig& cfg, const std::string& key,
               const std::string& value) {
  if (key == "dataset") cfg.dataset = value;
  else if (key == "blobs.seed") cfg.blobs_seed = std::stoull(value);
  else if (key == "blobs.classes") cfg.blobs_classes = std::stoi(value);
  else if (key == "blobs.per_class") cfg.blobs_per_class = std::stoi(value);
  else if (key == "blobs.test_per_class") cfg.blobs_test_per_class = std::stoi(value);
  else if (key == "blobs.dim") cfg.blobs_dim = std::stoi(value);
  else if (key == "blobs.spread") cfg.blobs_spread = std::stod(value);
  else if (key == "idx.train_images") cfg.idx_train_images = value;
  else if (key == "idx.train_labels") cfg.idx_train_labels = value;
  else if (key == "idx.test_images") cfg.idx_test_images = value;
  else if (key == "idx.test_labels") cfg.idx_test_labels = value;
  else if (key == "csv.train") cfg.csv_train = value;
  else if (key == "csv.test") cfg.csv_test = value;
  else if (key == "teacher.widths") cfg.teacher.widths = parse_int_list(value);
  else if (key == "teacher.activation") cfg.teacher.activation = parse_activation(value);
  else if (key == "teacher.taps") cfg.teacher.tap_layers = parse_int_list(value);
  else if (key == "student.widths") cfg.student.widths = parse_int_list(value);
  else if (key == "student.activation") cfg.student.activation = parse_activation(value);
  else if (key == "student.taps") cfg.student.tap_layers = parse_int_list(value);
  else if (key == "loss.alpha") cfg.train.loss.alpha = std::stod(value);
  else if (key == "loss.beta") cfg.train.loss.beta = std::stod(value);
  else if (key == "loss.temperature") cfg.train.loss.temperature = std::stod(value);
  else if (key == "loss.hard_label_weight") cfg.train.loss.hard_label_weight = std::stod(value);
  else if (key == "loss.gamma_logit") cfg.train.loss.gamma_logit = std::stod(value);
  else if (key == "loss.gamma_feature") cfg.train.loss.gamma_feature = parse_double_list(value);
  else if (key == "loss.feature_k") cfg.train.loss.feature_k = parse_int_list(value);
  else if (key == "loss.t_squared") cfg.train.loss.temperature_squared_scaling = std::stoi(value) != 0;
  else if (key == "train.epochs") cfg.train.epochs = std::stoi(value);
  else if (key == "train.batch_size") cfg.train.batch_size = std::stoi(value);
  else if (key == "train.momentum") cfg.train.momentum = std::stod(value);
  else if (key == "train.weight_decay") cfg.train.weight_decay = std::stod(value);
  else if (key == "train.base_lr") cfg.train.schedule.base_lr = std::stod(value);
  else if (key == "train.warmup_epochs") cfg.train.schedule.warmup_epochs = std::stoi(value);
  else if (key == "train.milestones") cfg.train.schedule.milestones = parse_int_list(value);
  else if (key == "train.decay_factor") cfg.train.schedule.decay_factor = std::stod(value);
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& c : split_list(value)) cfg.seeds.push_back(std::stoull(c));
  } else if (key == "output_dir") cfg.output_dir = value;
  else throw std::invalid_argument("config: unknown key " + key);
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.teacher.widths = {8, 64, 32, 16, 4};
  cfg.teacher.tap_layers = {2, 3};
  cfg.student.widths = {8, 32, 16, 4};
  cfg.student.tap_layers = {1, 2};
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg = default_config();
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    }
    try {
      apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("config: bad value at line " +
                                  std::to_string(lineno));
    }
  }
  cfg.teacher.validate();
  cfg.student.validate();
  if (cfg.seeds.empty()) throw std::invalid_argument("config: empty seed list");
  // With T^2 scaling the raw feature terms dominate the objective at desk
  // scale; a small default weight keeps them a complement to the logit loss.
  if (cfg.train.loss.gamma_feature.empty()) {
    cfg.train.loss.gamma_feature.assign(cfg.student.tap_layers.size(), 0.05);
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg) {
  if (cfg.dataset == "blobs") {
    Dataset train = generate_blobs(cfg.blobs_seed, cfg.blobs_classes,
                                   cfg.blobs_per_class, cfg.blobs_dim,
                                   cfg.blobs_spread);
    Dataset test = generate_blobs(cfg.blobs_seed ^ 0x7465737473ULL,
                                  cfg.blobs_classes, cfg.blobs_test_per_class,
                                  cfg.blobs_dim, cfg.blobs_spread);
    return {std::move(train), std::move(test)};
  }
  if (cfg.dataset == "idx") {
    return {load_idx(cfg.idx_train_images, cfg.idx_train_labels),
            load_idx(cfg.idx_test_images, cfg.idx_test_labels)};
  }
  if (cfg.dataset == "csv") {
    return {load_csv(cfg.csv_train), load_csv(cfg.csv_test)};
  }
  throw std::invalid_argument("config: unknown dataset kind " + cfg.dataset);
}

// ---------------------------------------------------------------------------
// verify

namespace {

Vec random_vec(std::mt19937_64& rng, int n, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  Vec v(n);
  for (double& e : v) e = gauss(rng);
  return v;
}

// Bounded logits keep every softmax entry above the kProbFloor clamp at the
// smallest temperature used below, where the decomposition is exact.
Vec random_logits(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> uni(-3.0, 3.0);
  Vec v(n);
  for (double& e : v) e = uni(rng);
  return v;
}

Partition random_partition(std::mt19937_64& rng, int total) {
  const int k = 1 + static_cast<int>(rng() % (total - 1));
  return partition_topk(random_vec(rng, total, 1.0), k);
}

struct PropertyResult {
  std::string name;
  int passed = 0;
  int total = 0;
  bool ok() const { return passed == total; }
};

}  // namespace

int run_verify(bool inject_corruption, std::ostream& out) {
  std::vector<PropertyResult> results;

  {
    PropertyResult r{"decoupling-identity", 0, 10000};
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> temp(0.5, 8.0);
    for (int i = 0; i < r.total; ++i) {
      const int c = 2 + static_cast<int>(rng() % 511);
      LossConfig cfg;
      cfg.temperature = temp(rng);
      const Partition part = random_partition(rng, c);
      const DecoupledKL d = decouple(random_logits(rng, c),
                                     random_logits(rng, c), part, cfg);
      const double scd_used = inject_corruption ? d.scd * 1.01 : d.scd;
      const double recon = d.bcd + d.p_s_teacher * scd_used + d.p_w_teacher * d.wcd;
      if (std::abs(d.plain_kl - recon) <= 1e-9 * std::max(1.0, d.plain_kl)) {
        ++r.passed;
      }
    }
    results.push_back(r);
  }

  {
    PropertyResult r{"single-label-identity", 0, 10000};
    std::mt19937_64 rng(1002);
    std::uniform_real_distribution<double> temp(0.5, 8.0);
    for (int i = 0; i < r.total; ++i) {
      const int c = 2 + static_cast<int>(rng() % 511);
      LossConfig cfg;
      cfg.temperature = temp(rng);
      const int target = static_cast<int>(rng() % c);
      const DecoupledKL d = decouple_single_label(
          random_logits(rng, c), random_logits(rng, c), target, cfg);
      const double recon = d.bcd + d.p_w_teacher * d.wcd;
      if (d.scd == 0.0 &&
          std::abs(d.plain_kl - recon) <= 1e-9 * std::max(1.0, d.plain_kl)) {
        ++r.passed;
      }
    }
    results.push_back(r);
  }

  {
    PropertyResult r{"product-identity", 0, 1000};
    std::mt19937_64 rng(1003);
    std::uniform_real_distribution<double> temp(0.5, 8.0);
    for (int i = 0; i < r.total; ++i) {
      const int c = 2 + static_cast<int>(rng() % 63);
      const Partition part = random_partition(rng, c);
      if (product_identity_check(random_logits(rng, c), part, temp(rng))) {
        ++r.passed;
      }
    }
    results.push_back(r);
  }

  {
    PropertyResult r{"gradient-check", 0, 100};
    std::mt19937_64 rng(1004);
    std::uniform_real_distribution<double> temp(0.5, 8.0);
    for (int i = 0; i < r.total; ++i) {
      const int c = 4 + static_cast<int>(rng() % 13);
      LossConfig cfg;
      cfg.temperature = temp(rng);
      const Partition part = random_partition(rng, c);
      const Vec ft = random_vec(rng, c, 2.0);
      Vec fs = random_vec(rng, c, 2.0);
      const Vec g = grad_student(ft, fs, part, cfg);
      bool ok = true;
      const double h = 1e-5;
      for (int j = 0; j < c; ++j) {
        const double keep = fs[j];
        fs[j] = keep + h;
        const double up = decouple(ft, fs, part, cfg).weighted_total;
        fs[j] = keep - h;
        const double dn = decouple(ft, fs, part, cfg).weighted_total;
        fs[j] = keep;
        const double fd = (up - dn) / (2.0 * h);
        if (std::abs(g[j]) > 1e-8 &&
            std::abs(fd - g[j]) > 1e-5 * std::max(1.0, std::abs(g[j]))) {
          ok = false;
        }
      }
      if (ok) ++r.passed;
    }
    results.push_back(r);
  }

  {
    PropertyResult r{"recovery-to-plain-kd", 0, 100};
    std::mt19937_64 rng(1005);
    std::uniform_real_distribution<double> temp(0.5, 8.0);
    for (int i = 0; i < r.total; ++i) {
      const int c = 2 + static_cast<int>(rng() % 63);
      LossConfig cfg;
      cfg.temperature = temp(rng);
      cfg.recover_plain_kd = true;
      const Partition part = random_partition(rng, c);
      const Vec ft = random_vec(rng, c, 2.0);
      const Vec fs = random_vec(rng, c, 2.0);
      const DecoupledKL d = decouple(ft, fs, part, cfg);
      const Vec g = grad_student(ft, fs, part, cfg);
      const Vec p = softmax(ft, cfg.temperature);
      const Vec q = softmax(fs, cfg.temperature);
      bool ok = std::abs(d.weighted_total - d.plain_kl) <= 1e-9;
      for (int j = 0; j < c && ok; ++j) {
        const double plain_grad = (q[j] - p[j]) / cfg.temperature;
        ok = std::abs(g[j] - plain_grad) <= 1e-8;
      }
      if (ok) ++r.passed;
    }
    results.push_back(r);
  }

  bool all_ok = true;
  for (const auto& r : results) {
    out << r.name << ": " << r.passed << "/" << r.total
        << (r.ok() ? " PASS" : " FAIL") << "\n";
    all_ok = all_ok && r.ok();
  }
  out << (all_ok ? "verify: PASS" : "verify: FAIL") << "\n";
  return all_ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train-teacher / distill

static void ensure_output_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output dir " + dir);
}

void run_train_teacher(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg.output_dir);
  auto [train_set, test_set] = load_datasets(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seeds.front();
  TrainResult res = train(cfg.teacher, train_set, test_set, tc,
                          DistillMode::CeOnly, nullptr, "teacher");
  save_checkpoint(cfg.output_dir + "/teacher.ckpt", res.model);
  write_metrics_csv(cfg.output_dir + "/teacher_metrics.csv", res.metrics);
}

void run_distill(const ExperimentConfig& cfg, const std::string& teacher_path,
                 const std::string& mode_str) {
  ensure_output_dir(cfg.output_dir);
  const DistillMode mode = parse_mode(mode_str);
  auto [train_set, test_set] = load_datasets(cfg);

  Mlp teacher;
  if (mode != DistillMode::CeOnly) {
    teacher = load_checkpoint(teacher_path);
    if (teacher.spec().output_width() != train_set.class_count) {
      throw FormatError("distill: teacher class count does not match dataset");
    }
  }

  for (std::uint64_t seed : cfg.seeds) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const std::string run_id = "distill-" + mode_str;
    TrainResult res = train(cfg.student, train_set, test_set, tc, mode,
                            mode == DistillMode::CeOnly ? nullptr : &teacher,
                            run_id);
    const std::string stem = cfg.output_dir + "/distill_" + mode_str +
                             "_seed" + std::to_string(seed);
    save_checkpoint(stem + ".ckpt", res.model);
    write_metrics_csv(stem + ".csv", res.metrics);
  }
}

// ---------------------------------------------------------------------------
// ablate

double calibrate_gamma_feature(const Mlp& teacher, const Mlp& student,
                               const Dataset& data, const LossConfig& cfg,
                               double target, int batch_size) {
  const size_t n = std::min(data.size(), static_cast<size_t>(batch_size));
  std::vector<Vec> inputs(data.inputs.begin(), data.inputs.begin() + n);
  std::vector<int> targets(data.labels.begin(), data.labels.begin() + n);

  LossConfig unit = cfg;
  unit.gamma_feature.assign(student.spec().tap_layers.size(), 1.0);
  const TapActivations t = teacher.forward_with_taps(inputs);
  const TapActivations s = student.forward_with_taps(inputs);
  const BatchLoss bl = cakd_total(t, s, targets, unit);

  const double logit_loss = unit.gamma_logit * bl.breakdown[0].weighted_total;
  double feature_loss_per_gamma = 0.0;
  for (size_t site = 1; site < bl.breakdown.size(); ++site) {
    feature_loss_per_gamma += bl.breakdown[site].weighted_total;
  }
  if (feature_loss_per_gamma <= 0.0) {
    throw std::runtime_error("calibrate_gamma_feature: zero feature loss");
  }
  return target * logit_loss / feature_loss_per_gamma;
}

namespace {

struct AblationRow {
  std::string setting;
  std::string seed;  // number or "mean"
  double accuracy = 0.0;
  double ps_pw = 0.0;
};

double final_test_metric(const std::vector<MetricsRecord>& rows,
                         double MetricsRecord::*field) {
  double value = 0.0;
  int best_epoch = -1;
  for (const auto& r : rows) {
    if (r.split == "test" && r.epoch > best_epoch) {
      best_epoch = r.epoch;
      value = r.*field;
    }
  }
  return value;
}

void write_ablation_csv(const std::string& path, const std::string& sweep,
                        const std::vector<AblationRow>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "sweep,setting,seed,accuracy,ps_pw\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", r.accuracy, r.ps_pw);
    os << sweep << ',' << r.setting << ',' << r.seed << ',' << buf << '\n';
  }
}

void append_setting(std::vector<AblationRow>& out, const std::string& setting,
                    const std::vector<std::pair<std::uint64_t, std::pair<double, double>>>& runs) {
  double acc_sum = 0.0, ratio_sum = 0.0;
  for (const auto& [seed, metrics] : runs) {
    out.push_back({setting, std::to_string(seed), metrics.first, metrics.second});
    acc_sum += metrics.first;
    ratio_sum += metrics.second;
  }
  const double n = static_cast<double>(runs.size());
  out.push_back({setting, "mean", acc_sum / n, ratio_sum / n});
}

}  // namespace

void run_ablate(const ExperimentConfig& cfg, const std::string& sweep) {
  if (sweep != "alpha-beta" && sweep != "loss-ratio" && sweep != "components") {
    throw std::invalid_argument("ablate: unknown sweep " + sweep);
  }
  ensure_output_dir(cfg.output_dir);
  auto [train_set, test_set] = load_datasets(cfg);

  // Shared frozen teacher for the whole sweep.
  TrainConfig teacher_tc = cfg.train;
  teacher_tc.seed = cfg.seeds.front();
  const Mlp teacher = train(cfg.teacher, train_set, test_set, teacher_tc,
                            DistillMode::CeOnly, nullptr, "teacher")
                          .model;

  auto run_one = [&](std::uint64_t seed, DistillMode mode,
                     const LossConfig& loss) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.loss = loss;
    const TrainResult res = train(cfg.student, train_set, test_set, tc, mode,
                                  &teacher, "ablate");
    return std::make_pair(final_test_metric(res.metrics, &MetricsRecord::accuracy),
                          final_test_metric(res.metrics, &MetricsRecord::ps_pw));
  };

  std::vector<AblationRow> rows;

  if (sweep == "alpha-beta") {
    const std::vector<std::pair<double, double>> grid = {
        {2, 2}, {4, 4}, {8, 4}, {8, 2}, {8, 1}};
    for (const auto& [alpha, beta] : grid) {
      LossConfig loss = cfg.train.loss;
      loss.alpha = alpha;
      loss.beta = beta;
      std::vector<std::pair<std::uint64_t, std::pair<double, double>>> runs;
      for (std::uint64_t seed : cfg.seeds) {
        runs.emplace_back(seed, run_one(seed, DistillMode::CakdFull, loss));
      }
      std::ostringstream name;
      name << "a" << alpha << "_b" << beta;
      append_setting(rows, name.str(), runs);
    }
  } else if (sweep == "loss-ratio") {
    const std::vector<double> targets = {0.2, 0.5, 1.0, 2.0, 5.0};
    Mlp probe(cfg.student);
    probe.init(cfg.seeds.front());
    for (double target : targets) {
      LossConfig loss = cfg.train.loss;
      const double gamma = calibrate_gamma_feature(
          teacher, probe, train_set, loss, target, cfg.train.batch_size);
      loss.gamma_feature.assign(cfg.student.tap_layers.size(), gamma);
      std::vector<std::pair<std::uint64_t, std::pair<double, double>>> runs;
      for (std::uint64_t seed : cfg.seeds) {
        runs.emplace_back(seed, run_one(seed, DistillMode::CakdFull, loss));
      }
      std::ostringstream name;
      name << "ratio" << target;
      append_setting(rows, name.str(), runs);
    }
  } else {  // components
    const size_t taps = cfg.student.tap_layers.size();
    struct Variant {
      std::string name;
      DistillMode mode;
      int active_taps;  // counted from the last tap backwards
    };
    const std::vector<Variant> variants = {
        {"logit", DistillMode::CakdLogit, 0},
        {"single_feature", DistillMode::CakdFeature, 1},
        {"logit_single", DistillMode::CakdFull, 1},
        {"logit_double", DistillMode::CakdFull, 2},
    };
    for (const auto& v : variants) {
      LossConfig loss = cfg.train.loss;
      loss.gamma_feature.assign(taps, 0.0);
      for (int i = 0; i < v.active_taps && i < static_cast<int>(taps); ++i) {
        loss.gamma_feature[taps - 1 - i] = 1.0;
      }
      std::vector<std::pair<std::uint64_t, std::pair<double, double>>> runs;
      for (std::uint64_t seed : cfg.seeds) {
        runs.emplace_back(seed, run_one(seed, v.mode, loss));
      }
      append_setting(rows, v.name, runs);
    }
  }

  write_ablation_csv(cfg.output_dir + "/ablate_" + sweep + ".csv", sweep, rows);
}

// ---------------------------------------------------------------------------
// report

void run_report(const std::vector<std::string>& metrics_files,
                const std::string& out_prefix) {
  if (metrics_files.empty()) {
    throw std::invalid_argument("report: need at least one metrics file");
  }
  std::vector<MetricsRecord> all;
  for (const auto& path : metrics_files) {
    const auto rows = read_metrics_csv(path);
    all.insert(all.end(), rows.begin(), rows.end());
  }

  // Final test accuracy per (run_id, seed).
  std::map<std::pair<std::string, std::uint64_t>, std::pair<int, double>> finals;
  for (const auto& r : all) {
    if (r.split != "test") continue;
    auto& slot = finals[{r.run_id, r.seed}];
    if (slot.first <= r.epoch) slot = {r.epoch, r.accuracy};
  }
  if (finals.empty()) throw FormatError("report: no test rows in inputs");

  std::ofstream summary(out_prefix + "_summary.csv",
                        std::ios::binary | std::ios::trunc);
  if (!summary) throw std::runtime_error("report: cannot write summary");
  summary << "run_id,seed,final_test_accuracy,sd\n";
  char buf[64];
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& [key, value] : finals) {
    std::snprintf(buf, sizeof(buf), "%.10g", value.second);
    summary << key.first << ',' << key.second << ',' << buf << ",\n";
    grouped[key.first].push_back(value.second);
  }
  for (const auto& [run_id, accs] : grouped) {
    const double n = static_cast<double>(accs.size());
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= n;
    double sd = 0.0;
    if (accs.size() > 1) {
      for (double a : accs) sd += (a - mean) * (a - mean);
      sd = std::sqrt(sd / (n - 1.0));
    }
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", mean, sd);
    summary << run_id << ",mean," << buf << '\n';
  }

  std::ofstream series(out_prefix + "_series.csv",
                       std::ios::binary | std::ios::trunc);
  if (!series) throw std::runtime_error("report: cannot write series");
  series << metrics_csv_header() << '\n';
  for (const auto& r : all) series << metrics_csv_row(r) << '\n';
}

}  // namespace cakd
