#include "cakd/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cakd {

DistillMode parse_mode(const std::string& name) {
  if (name == "ce") return DistillMode::CeOnly;
  if (name == "kd") return DistillMode::Kd;
  if (name == "cakd-logit") return DistillMode::CakdLogit;
  if (name == "cakd-feature") return DistillMode::CakdFeature;
  if (name == "cakd-full") return DistillMode::CakdFull;
  throw std::invalid_argument("unknown distillation mode: " + name);
}

std::string mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::CeOnly: return "ce";
    case DistillMode::Kd: return "kd";
    case DistillMode::CakdLogit: return "cakd-logit";
    case DistillMode::CakdFeature: return "cakd-feature";
    case DistillMode::CakdFull: return "cakd-full";
  }
  return "?";
}

LossConfig mode_loss_config(const LossConfig& base, DistillMode mode,
                            size_t tap_sites) {
  LossConfig cfg = base;
  if (cfg.gamma_feature.size() < tap_sites) {
    cfg.gamma_feature.resize(tap_sites, 1.0);
  }
  switch (mode) {
    case DistillMode::CeOnly:
      cfg.gamma_logit = 0.0;
      cfg.gamma_feature.assign(tap_sites, 0.0);
      break;
    case DistillMode::Kd:
      cfg.recover_plain_kd = true;
      cfg.gamma_feature.assign(tap_sites, 0.0);
      break;
    case DistillMode::CakdLogit:
      cfg.gamma_feature.assign(tap_sites, 0.0);
      break;
    case DistillMode::CakdFeature:
      cfg.gamma_logit = 0.0;
      break;
    case DistillMode::CakdFull:
      break;
  }
  return cfg;
}

double evaluate_accuracy(const Mlp& model, const Dataset& data) {
  const TapActivations out = model.forward_with_taps(data.inputs);
  size_t correct = 0;
  for (size_t n = 0; n < data.size(); ++n) {
    const Vec& z = out.logits[n];
    int best = 0;
    for (size_t i = 1; i < z.size(); ++i) {
      if (z[i] > z[best]) best = static_cast<int>(i);
    }
    if (best == data.labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

struct SiteMeans {
  double ce = 0.0;
  DecoupledKL logit;
  DecoupledKL feat;  // mean over feature sites
  double ps_pw = 0.0;
  double weight = 0.0;

  void add(const BatchLoss& bl, double ratio_sum, double batch) {
    ce += bl.ce * batch;
    auto acc = [batch](DecoupledKL& dst, const DecoupledKL& src, double f) {
      dst.bcd += f * batch * src.bcd;
      dst.scd += f * batch * src.scd;
      dst.wcd += f * batch * src.wcd;
      dst.plain_kl += f * batch * src.plain_kl;
    };
    acc(logit, bl.breakdown[0], 1.0);
    const size_t sites = bl.breakdown.size() - 1;
    for (size_t s = 0; s < sites; ++s) {
      acc(feat, bl.breakdown[s + 1], 1.0 / static_cast<double>(sites));
    }
    ps_pw += ratio_sum;
    weight += batch;
  }

  void fill(MetricsRecord& r) const {
    const double w = weight > 0.0 ? weight : 1.0;
    r.ce = ce / w;
    r.logit_bcd = logit.bcd / w;
    r.logit_scd = logit.scd / w;
    r.logit_wcd = logit.wcd / w;
    r.logit_kl = logit.plain_kl / w;
    r.feat_bcd = feat.bcd / w;
    r.feat_scd = feat.scd / w;
    r.feat_wcd = feat.wcd / w;
    r.feat_kl = feat.plain_kl / w;
    r.ps_pw = ps_pw / w;
  }
};

// Sum over the batch of the teacher logit-site confidence ratio.
double ratio_sum(const TapActivations& teacher, const std::vector<int>& targets,
                 double temperature) {
  double sum = 0.0;
  for (size_t n = 0; n < teacher.logits.size(); ++n) {
    const Partition part = partition_single_label(
        static_cast<int>(teacher.logits[n].size()), targets[n]);
    sum += confidence_ratio(teacher.logits[n], part, temperature);
  }
  return sum;
}

BatchLoss ce_only_loss(const TapActivations& student,
                       const std::vector<int>& targets, const LossConfig& cfg) {
  BatchLoss bl;
  bl.breakdown.assign(1, DecoupledKL{});
  for (size_t n = 0; n < student.logits.size(); ++n) {
    bl.ce += cross_entropy(student.logits[n], targets[n]);
  }
  bl.ce /= static_cast<double>(student.logits.size());
  bl.total = cfg.hard_label_weight * bl.ce;
  return bl;
}

}  // namespace

TrainResult train(const MlpSpec& spec, const Dataset& train_set,
                  const Dataset& test_set, const TrainConfig& cfg,
                  DistillMode mode, const Mlp* teacher,
                  const std::string& run_id) {
  spec.validate();
  train_set.validate();
  test_set.validate();
  if (mode != DistillMode::CeOnly && teacher == nullptr) {
    throw std::logic_error("train: distillation mode requires a teacher");
  }
  if (teacher != nullptr &&
      teacher->spec().output_width() != spec.output_width()) {
    throw FormatError("train: teacher/student class count mismatch");
  }

  const bool use_features =
      mode == DistillMode::CakdFeature || mode == DistillMode::CakdFull;
  const size_t sites = use_features ? spec.tap_layers.size() : 0;
  if (use_features && teacher->spec().tap_layers.size() != spec.tap_layers.size()) {
    throw FormatError("train: teacher/student tap site count mismatch");
  }
  const LossConfig eff = mode_loss_config(cfg.loss, mode, spec.tap_layers.size());
  const double tsq = eff.temperature_squared_scaling
                         ? eff.temperature * eff.temperature
                         : 1.0;

  TrainResult result;
  result.model = Mlp(spec);
  result.model.init(cfg.seed);
  Mlp& model = result.model;

  SgdState sgd;
  sgd.momentum = cfg.momentum;
  sgd.weight_decay = cfg.weight_decay;
  sgd.schedule = cfg.schedule;
  sgd.attach(model);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SiteMeans means;
    for (const auto& block : batches(train_set.size(), cfg.batch_size,
                                     cfg.seed, epoch)) {
      std::vector<Vec> inputs;
      std::vector<int> targets;
      inputs.reserve(block.size());
      for (int idx : block) {
        inputs.push_back(train_set.inputs[idx]);
        targets.push_back(train_set.labels[idx]);
      }
      const double batch = static_cast<double>(block.size());

      ForwardCache cache;
      TapActivations student = model.forward_with_taps(inputs, &cache);
      // Only the tapped sites that carry loss need teacher activations.
      if (!use_features) student.taps.clear();

      TapActivations teacher_out;
      if (mode != DistillMode::CeOnly) {
        teacher_out = teacher->forward_with_taps(inputs);
        if (!use_features) teacher_out.taps.clear();
        means.add(cakd_total(teacher_out, student, targets, eff),
                  ratio_sum(teacher_out, targets, eff.temperature), batch);
      } else {
        means.add(ce_only_loss(student, targets, eff), 0.0, batch);
      }

      // Hard-label CE gradient at the logits.
      std::vector<Vec> dlogits(block.size());
      for (size_t n = 0; n < block.size(); ++n) {
        Vec d = softmax(student.logits[n], 1.0);
        d[targets[n]] -= 1.0;
        for (double& v : d) v *= eff.hard_label_weight / batch;
        dlogits[n] = std::move(d);
      }
      // Decoupled logit loss gradient.
      if (mode != DistillMode::CeOnly && eff.gamma_logit != 0.0) {
        for (size_t n = 0; n < block.size(); ++n) {
          const Partition part = partition_single_label(
              static_cast<int>(student.logits[n].size()), targets[n]);
          const Vec g = grad_student(teacher_out.logits[n], student.logits[n],
                                     part, eff);
          for (size_t i = 0; i < g.size(); ++i) {
            dlogits[n][i] += eff.gamma_logit * tsq * g[i] / batch;
          }
        }
      }
      // Feature tap gradients.
      std::vector<std::vector<Vec>> dtaps;
      if (use_features) {
        dtaps.resize(spec.tap_layers.size());
        for (size_t s = 0; s < sites; ++s) {
          const double gamma = eff.gamma_feature[s];
          for (size_t n = 0; n < block.size(); ++n) {
            const Vec& ft = teacher_out.taps[s][n];
            const Vec& fs = student.taps[s][n];
            Vec g(fs.size(), 0.0);
            if (gamma != 0.0) {
              const Partition part = feature_partition(ft, eff, s);
              g = grad_student(ft, fs, part, eff);
              for (double& v : g) v *= gamma * tsq / batch;
            }
            dtaps[s].push_back(std::move(g));
          }
        }
      }

      const Gradients grads = model.backward(cache, dlogits, dtaps);
      sgd_step(sgd, model, grads, epoch);
    }

    // Per-epoch records: training-pass means on the train row, a fresh
    // evaluation pass on the test row.
    MetricsRecord train_row;
    train_row.run_id = run_id;
    train_row.seed = cfg.seed;
    train_row.epoch = epoch;
    train_row.split = "train";
    train_row.accuracy = evaluate_accuracy(model, train_set);
    means.fill(train_row);
    result.metrics.push_back(train_row);

    MetricsRecord test_row = train_row;
    test_row.split = "test";
    test_row.accuracy = evaluate_accuracy(model, test_set);
    {
      SiteMeans eval_means;
      TapActivations student = model.forward_with_taps(test_set.inputs);
      if (!use_features) student.taps.clear();
      if (mode != DistillMode::CeOnly) {
        TapActivations teacher_out = teacher->forward_with_taps(test_set.inputs);
        if (!use_features) teacher_out.taps.clear();
        eval_means.add(cakd_total(teacher_out, student, test_set.labels, eff),
                       ratio_sum(teacher_out, test_set.labels, eff.temperature),
                       static_cast<double>(test_set.size()));
      } else {
        eval_means.add(ce_only_loss(student, test_set.labels, eff), 0.0,
                       static_cast<double>(test_set.size()));
      }
      eval_means.fill(test_row);
    }
    result.metrics.push_back(test_row);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Metrics CSV

std::string metrics_csv_header() {
  return "run_id,seed,epoch,split,accuracy,ce,"
         "logit_bcd,logit_scd,logit_wcd,logit_kl,"
         "feat_bcd,feat_scd,feat_wcd,feat_kl,ps_pw";
}

static std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::ostringstream os;
  os << r.run_id << ',' << r.seed << ',' << r.epoch << ',' << r.split << ','
     << fmt(r.accuracy) << ',' << fmt(r.ce) << ',' << fmt(r.logit_bcd) << ','
     << fmt(r.logit_scd) << ',' << fmt(r.logit_wcd) << ',' << fmt(r.logit_kl)
     << ',' << fmt(r.feat_bcd) << ',' << fmt(r.feat_scd) << ','
     << fmt(r.feat_wcd) << ',' << fmt(r.feat_kl) << ',' << fmt(r.ps_pw);
  return os.str();
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRecord>& rows) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open metrics file " + path);
  os << metrics_csv_header() << '\n';
  for (const auto& r : rows) os << metrics_csv_row(r) << '\n';
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open metrics file " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("metrics file is empty: " + path);
  if (line != metrics_csv_header()) {
    throw FormatError("unexpected metrics header in " + path);
  }
  std::vector<MetricsRecord> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 15) throw FormatError("malformed metrics row in " + path);
    MetricsRecord r;
    try {
      r.run_id = cells[0];
      r.seed = std::stoull(cells[1]);
      r.epoch = std::stoi(cells[2]);
      r.split = cells[3];
      r.accuracy = std::stod(cells[4]);
      r.ce = std::stod(cells[5]);
      r.logit_bcd = std::stod(cells[6]);
      r.logit_scd = std::stod(cells[7]);
      r.logit_wcd = std::stod(cells[8]);
      r.logit_kl = std::stod(cells[9]);
      r.feat_bcd = std::stod(cells[10]);
      r.feat_scd = std::stod(cells[11]);
      r.feat_wcd = std::stod(cells[12]);
      r.feat_kl = std::stod(cells[13]);
      r.ps_pw = std::stod(cells[14]);
    } catch (const std::exception&) {
      throw FormatError("bad numeric field in metrics row in " + path);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace cakd
