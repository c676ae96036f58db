// Test-only reference implementations, kept independent of the library code
// paths they check.
#pragma once

#include <cmath>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

// Direct softmax without the max shift (safe only for small logits).
inline Vec softmax_direct(const Vec& f, double t) {
  Vec p(f.size());
  double denom = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    p[i] = std::exp(f[i] / t);
    denom += p[i];
  }
  for (double& v : p) v /= denom;
  return p;
}

inline double kl_direct(const Vec& p, const Vec& q) {
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

// Brute-force cluster quantities evaluated straight from their definitions.
struct Decomposition {
  double p_s, p_w;
  Vec strong_hat, weak_hat;
};

inline Decomposition decompose_direct(const Vec& f, const std::vector<int>& strong,
                                      const std::vector<int>& weak, double t) {
  Decomposition d;
  double total = 0.0, s_sum = 0.0, w_sum = 0.0;
  for (double v : f) total += std::exp(v / t);
  for (int i : strong) s_sum += std::exp(f[i] / t);
  for (int i : weak) w_sum += std::exp(f[i] / t);
  d.p_s = s_sum / total;
  d.p_w = w_sum / total;
  for (int i : strong) d.strong_hat.push_back(std::exp(f[i] / t) / s_sum);
  for (int i : weak) d.weak_hat.push_back(std::exp(f[i] / t) / w_sum);
  return d;
}

}  // namespace oracle
