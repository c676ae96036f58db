#include "cakd/prob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cakd {

void check_finite(const Vec& f) {
  if (f.empty()) {
    throw std::invalid_argument("empty input vector");
  }
  for (double v : f) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("non-finite entry in input vector");
    }
  }
}

bool is_prob_vector(const Vec& p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

static void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
}

Vec softmax(const Vec& f, double temperature) {
  check_finite(f);
  check_temperature(temperature);

  const double fmax = *std::max_element(f.begin(), f.end());
  Vec p(f.size());
  double denom = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    p[i] = std::exp((f[i] - fmax) / temperature);
    denom += p[i];
  }
  for (double& v : p) v /= denom;
  return p;
}

Vec log_softmax(const Vec& f, double temperature) {
  check_finite(f);
  check_temperature(temperature);

  const double fmax = *std::max_element(f.begin(), f.end());
  double sum = 0.0;
  for (double v : f) sum += std::exp((v - fmax) / temperature);
  const double lse = std::log(sum);

  Vec out(f.size());
  for (size_t i = 0; i < f.size(); ++i) {
    out[i] = (f[i] - fmax) / temperature - lse;
  }
  return out;
}

double kl_divergence(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: length mismatch");
  }
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;  // 0 ln 0 = 0
    kl += p[i] * std::log(p[i] / std::max(q[i], kProbFloor));
  }
  return kl;
}

}  // namespace cakd
