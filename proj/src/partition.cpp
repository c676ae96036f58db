#include "cakd/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cakd {

Partition partition_single_label(int total, int target) {
  if (total < 2) {
    throw std::invalid_argument("partition_single_label: need at least 2 classes");
  }
  if (target < 0 || target >= total) {
    throw std::invalid_argument("partition_single_label: target out of range");
  }
  Partition part;
  part.total = total;
  part.strong = {target};
  part.weak.reserve(total - 1);
  for (int i = 0; i < total; ++i) {
    if (i != target) part.weak.push_back(i);
  }
  return part;
}

Partition partition_topk(const Vec& teacher_values, int k) {
  check_finite(teacher_values);
  const int total = static_cast<int>(teacher_values.size());
  if (k < 1 || k >= total) {
    throw std::invalid_argument("partition_topk: k must be in [1, C-1]");
  }
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Ties resolve to the lowest index so runs are bit-reproducible.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return teacher_values[a] > teacher_values[b];
  });

  Partition part;
  part.total = total;
  part.strong.assign(order.begin(), order.begin() + k);
  part.weak.assign(order.begin() + k, order.end());
  std::sort(part.strong.begin(), part.strong.end());
  std::sort(part.weak.begin(), part.weak.end());
  return part;
}

static void check_shape(const Vec& f, const Partition& part) {
  if (static_cast<int>(f.size()) != part.total) {
    throw std::invalid_argument("partition does not cover the input vector");
  }
}

BinaryProb binary_probs(const Vec& f, const Partition& part, double temperature) {
  check_shape(f, part);
  if (!part.two_sided()) {
    throw DegeneratePartitionError("binary_probs: both clusters must be non-empty");
  }
  const Vec p = softmax(f, temperature);
  BinaryProb b;
  for (int i : part.strong) b.p_s += p[i];
  for (int i : part.weak) b.p_w += p[i];
  const double total = b.p_s + b.p_w;
  b.p_s /= total;
  b.p_w /= total;
  return b;
}

static Vec cluster_softmax(const Vec& f, const std::vector<int>& idx,
                           double temperature) {
  if (idx.empty()) return {};
  Vec sub;
  sub.reserve(idx.size());
  for (int i : idx) sub.push_back(f[i]);
  return softmax(sub, temperature);
}

ClusterProbs within_cluster_probs(const Vec& f, const Partition& part,
                                  double temperature) {
  check_shape(f, part);
  ClusterProbs cp;
  cp.strong_probs = cluster_softmax(f, part.strong, temperature);
  cp.weak_probs = cluster_softmax(f, part.weak, temperature);
  return cp;
}

bool product_identity_check(const Vec& f, const Partition& part,
                            double temperature, double tol) {
  check_shape(f, part);
  const Vec p = softmax(f, temperature);
  const BinaryProb b = binary_probs(f, part, temperature);
  const ClusterProbs cp = within_cluster_probs(f, part, temperature);
  for (size_t j = 0; j < part.strong.size(); ++j) {
    if (std::abs(p[part.strong[j]] - b.p_s * cp.strong_probs[j]) > tol) return false;
  }
  for (size_t j = 0; j < part.weak.size(); ++j) {
    if (std::abs(p[part.weak[j]] - b.p_w * cp.weak_probs[j]) > tol) return false;
  }
  return true;
}

double confidence_ratio(const Vec& f, const Partition& part, double temperature) {
  check_shape(f, part);
  if (part.weak.empty()) {
    throw DegeneratePartitionError("confidence_ratio: weak cluster is empty");
  }
  const double fmax = *std::max_element(f.begin(), f.end());
  double num = 0.0, den = 0.0;
  for (int i : part.strong) num += std::exp((f[i] - fmax) / temperature);
  for (int i : part.weak) den += std::exp((f[i] - fmax) / temperature);
  return num / den;
}

}  // namespace cakd
