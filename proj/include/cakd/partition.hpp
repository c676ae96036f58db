#pragma once

#include <stdexcept>
#include <vector>

#include "cakd/prob.hpp"

namespace cakd {

// Thrown when an operation needs both clusters populated but one is empty.
struct DegeneratePartitionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Index split of {0..total-1} into a strong cluster S and its complement W.
// Both index lists are kept sorted ascending.
struct Partition {
  std::vector<int> strong;
  std::vector<int> weak;
  int total = 0;

  bool two_sided() const { return !strong.empty() && !weak.empty(); }
};

// Binary mass split across the two clusters; p_s + p_w = 1.
struct BinaryProb {
  double p_s = 0.0;
  double p_w = 0.0;
};

// Renormalized distributions within each cluster. An empty vector means the
// corresponding cluster is empty.
struct ClusterProbs {
  Vec strong_probs;
  Vec weak_probs;
};

// S = {target}, W = everything else. Requires total >= 2.
Partition partition_single_label(int total, int target);

// S = indices of the k largest teacher values, ties broken by lowest index.
// Requires 1 <= k < values.size().
Partition partition_topk(const Vec& teacher_values, int k);

// Eq-style cluster masses computed with a shared max shift.
BinaryProb binary_probs(const Vec& f, const Partition& part, double temperature);

// Within-cluster softmax distributions; a singleton cluster yields [1.0].
ClusterProbs within_cluster_probs(const Vec& f, const Partition& part,
                                  double temperature);

// True iff softmax(f,T)_i == b_{cluster(i)} * phat_i for every i, within tol.
bool product_identity_check(const Vec& f, const Partition& part,
                            double temperature, double tol = 1e-10);

// p_s / p_w of the teacher distribution; diagnostic for choosing alpha/beta.
double confidence_ratio(const Vec& f, const Partition& part, double temperature);

}  // namespace cakd
