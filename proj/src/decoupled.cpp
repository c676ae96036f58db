#include "cakd/decoupled.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cakd {

static double kl_term(double p, double q) {
  if (p <= 0.0) return 0.0;
  return p * std::log(p / std::max(q, kProbFloor));
}

double bcd(const BinaryProb& teacher, const BinaryProb& student) {
  return kl_term(teacher.p_s, student.p_s) + kl_term(teacher.p_w, student.p_w);
}

double scd(const Vec& strong_teacher, const Vec& strong_student) {
  if (strong_teacher.size() <= 1 && strong_student.size() <= 1) return 0.0;
  return kl_divergence(strong_teacher, strong_student);
}

double wcd(const Vec& weak_teacher, const Vec& weak_student) {
  if (weak_teacher.size() <= 1 && weak_student.size() <= 1) return 0.0;
  return kl_divergence(weak_teacher, weak_student);
}

DecoupledKL decouple(const Vec& f_teacher, const Vec& f_student,
                     const Partition& part, const LossConfig& cfg) {
  if (f_teacher.size() != f_student.size()) {
    throw std::invalid_argument("decouple: teacher/student length mismatch");
  }
  if (!part.two_sided()) {
    throw DegeneratePartitionError("decouple: partition must be two-sided");
  }
  const double t = cfg.temperature;

  const BinaryProb b_teacher = binary_probs(f_teacher, part, t);
  const BinaryProb b_student = binary_probs(f_student, part, t);
  const ClusterProbs c_teacher = within_cluster_probs(f_teacher, part, t);
  const ClusterProbs c_student = within_cluster_probs(f_student, part, t);

  DecoupledKL d;
  d.p_s_teacher = b_teacher.p_s;
  d.p_w_teacher = b_teacher.p_w;
  d.bcd = bcd(b_teacher, b_student);
  d.scd = scd(c_teacher.strong_probs, c_student.strong_probs);
  d.wcd = wcd(c_teacher.weak_probs, c_student.weak_probs);
  d.plain_kl = kl_divergence(softmax(f_teacher, t), softmax(f_student, t));

  const double alpha = cfg.recover_plain_kd ? d.p_s_teacher : cfg.alpha;
  const double beta = cfg.recover_plain_kd ? d.p_w_teacher : cfg.beta;
  d.weighted_total = d.bcd + alpha * d.scd + beta * d.wcd;
  return d;
}

DecoupledKL decouple_single_label(const Vec& f_teacher, const Vec& f_student,
                                  int target, const LossConfig& cfg) {
  const Partition part =
      partition_single_label(static_cast<int>(f_teacher.size()), target);
  DecoupledKL d = decouple(f_teacher, f_student, part, cfg);
  d.scd = 0.0;  // singleton strong cluster
  return d;
}

Vec grad_student(const Vec& f_teacher, const Vec& f_student,
                 const Partition& part, const LossConfig& cfg) {
  if (f_teacher.size() != f_student.size()) {
    throw std::invalid_argument("grad_student: teacher/student length mismatch");
  }
  if (!part.two_sided()) {
    throw DegeneratePartitionError("grad_student: partition must be two-sided");
  }
  const double t = cfg.temperature;

  const BinaryProb b_teacher = binary_probs(f_teacher, part, t);
  const BinaryProb b_student = binary_probs(f_student, part, t);
  const ClusterProbs c_teacher = within_cluster_probs(f_teacher, part, t);
  const ClusterProbs c_student = within_cluster_probs(f_student, part, t);
  const Vec q = softmax(f_student, t);

  const double alpha = cfg.recover_plain_kd ? b_teacher.p_s : cfg.alpha;
  const double beta = cfg.recover_plain_kd ? b_teacher.p_w : cfg.beta;

  // d(BCD)/d f_j = (1/T) q_j ([j in S] - q_s)(p_w^T/q_w - p_s^T/q_s)
  const double bcd_factor =
      b_teacher.p_w / std::max(b_student.p_w, kProbFloor) -
      b_teacher.p_s / std::max(b_student.p_s, kProbFloor);

  Vec g(f_student.size(), 0.0);
  for (size_t n = 0; n < g.size(); ++n) {
    g[n] = q[n] * (0.0 - b_student.p_s) * bcd_factor / t;
  }
  for (size_t j = 0; j < part.strong.size(); ++j) {
    const int i = part.strong[j];
    g[i] = q[i] * (1.0 - b_student.p_s) * bcd_factor / t;
    // d(SCD)/d f_i = (1/T)(qhat_i - phat_i^T) within the strong cluster
    g[i] += alpha * (c_student.strong_probs[j] - c_teacher.strong_probs[j]) / t;
  }
  for (size_t j = 0; j < part.weak.size(); ++j) {
    const int i = part.weak[j];
    g[i] += beta * (c_student.weak_probs[j] - c_teacher.weak_probs[j]) / t;
  }
  return g;
}

double cross_entropy(const Vec& logits, int target) {
  if (target < 0 || target >= static_cast<int>(logits.size())) {
    throw std::invalid_argument("cross_entropy: target out of range");
  }
  return -log_softmax(logits, 1.0)[target];
}

static int default_feature_k(int width) {
  return (width + 3) / 4;  // ceil(width / 4)
}

Partition feature_partition(const Vec& teacher_tap, const LossConfig& cfg,
                            size_t site) {
  const int width = static_cast<int>(teacher_tap.size());
  int k = site < cfg.feature_k.size() && cfg.feature_k[site] > 0
              ? cfg.feature_k[site]
              : default_feature_k(width);
  k = std::min(k, width - 1);
  return partition_topk(teacher_tap, k);
}

static void accumulate(DecoupledKL& acc, const DecoupledKL& d) {
  acc.bcd += d.bcd;
  acc.scd += d.scd;
  acc.wcd += d.wcd;
  acc.p_s_teacher += d.p_s_teacher;
  acc.p_w_teacher += d.p_w_teacher;
  acc.plain_kl += d.plain_kl;
  acc.weighted_total += d.weighted_total;
}

static void scale(DecoupledKL& d, double s) {
  d.bcd *= s;
  d.scd *= s;
  d.wcd *= s;
  d.p_s_teacher *= s;
  d.p_w_teacher *= s;
  d.plain_kl *= s;
  d.weighted_total *= s;
}

BatchLoss cakd_total(const TapActivations& teacher, const TapActivations& student,
                     const std::vector<int>& targets, const LossConfig& cfg) {
  const size_t batch = student.logits.size();
  if (teacher.logits.size() != batch || targets.size() != batch) {
    throw std::invalid_argument("cakd_total: batch size mismatch");
  }
  if (teacher.taps.size() != student.taps.size()) {
    throw std::invalid_argument("cakd_total: tap site count mismatch");
  }
  const size_t sites = student.taps.size();
  if (!cfg.gamma_feature.empty() && cfg.gamma_feature.size() < sites) {
    throw std::invalid_argument("cakd_total: gamma_feature size mismatch");
  }
  if (batch == 0) {
    throw std::invalid_argument("cakd_total: empty batch");
  }

  const double tsq =
      cfg.temperature_squared_scaling ? cfg.temperature * cfg.temperature : 1.0;

  BatchLoss out;
  out.breakdown.assign(sites + 1, DecoupledKL{});

  for (size_t n = 0; n < batch; ++n) {
    if (teacher.logits[n].size() != student.logits[n].size()) {
      throw std::invalid_argument("cakd_total: logit width mismatch");
    }
    out.ce += cross_entropy(student.logits[n], targets[n]);
    const DecoupledKL d =
        decouple_single_label(teacher.logits[n], student.logits[n], targets[n], cfg);
    accumulate(out.breakdown[0], d);
  }

  for (size_t s = 0; s < sites; ++s) {
    if (teacher.taps[s].size() != batch || student.taps[s].size() != batch) {
      throw std::invalid_argument("cakd_total: tap batch mismatch");
    }
    for (size_t n = 0; n < batch; ++n) {
      const Vec& ft = teacher.taps[s][n];
      const Vec& fs = student.taps[s][n];
      if (ft.size() != fs.size()) {
        throw std::invalid_argument("cakd_total: tap width mismatch");
      }
      const Partition part = feature_partition(ft, cfg, s);
      accumulate(out.breakdown[s + 1], decouple(ft, fs, part, cfg));
    }
  }

  out.ce /= static_cast<double>(batch);
  for (auto& d : out.breakdown) scale(d, 1.0 / static_cast<double>(batch));

  out.total = cfg.hard_label_weight * out.ce +
              cfg.gamma_logit * tsq * out.breakdown[0].weighted_total;
  for (size_t s = 0; s < sites; ++s) {
    const double gamma = s < cfg.gamma_feature.size() ? cfg.gamma_feature[s] : 1.0;
    out.total += gamma * tsq * out.breakdown[s + 1].weighted_total;
  }
  return out;
}

}  // namespace cakd
