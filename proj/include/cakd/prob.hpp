#pragma once

#include <vector>

namespace cakd {

using Vec = std::vector<double>;

// Floor applied to student-side probabilities inside logs so that
// zero-probability entries keep the loss finite.
inline constexpr double kProbFloor = 1e-12;

// Temperature softmax, computed with max-subtraction so arbitrarily large
// logits do not overflow. Throws std::invalid_argument on empty input,
// non-finite entries, or T <= 0.
Vec softmax(const Vec& f, double temperature);

// Element-wise log of softmax(f, T) without forming unshifted exponentials.
Vec log_softmax(const Vec& f, double temperature);

// KL(p || q) = sum_i p_i ln(p_i / q_i), with 0 ln 0 = 0 and q_i clamped to
// kProbFloor. Both arguments must be valid probability vectors of equal
// length.
double kl_divergence(const Vec& p, const Vec& q);

// Validation helpers used by the ops above and by callers that build
// probability vectors by hand.
void check_finite(const Vec& f);
bool is_prob_vector(const Vec& p, double tol = 1e-9);

}  // namespace cakd
