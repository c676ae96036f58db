#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cakd/decoupled.hpp"
#include "cakd/prob.hpp"

namespace cakd {

enum class Activation : std::uint8_t { Relu = 0, Tanh = 1 };

// Layer widths run input, hidden..., output. tap_layers index hidden layers
// starting at 1; a tapped layer exposes its post-activation vector as a
// feature distillation site.
struct MlpSpec {
  std::vector<int> widths;
  Activation activation = Activation::Relu;
  std::vector<int> tap_layers;

  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
  void validate() const;
};

// Row-major dense matrix, out x in.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const {
    return a[static_cast<size_t>(i) * cols + j];
  }
};

struct Gradients {
  std::vector<Mat> dw;
  std::vector<Vec> db;
};

// Per-sample intermediate values kept for backward.
struct ForwardCache {
  std::vector<Vec> inputs;                // [sample]
  std::vector<std::vector<Vec>> pre;      // [layer][sample] pre-activation
  std::vector<std::vector<Vec>> act;      // [layer][sample] post-activation
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  // Fan-in-scaled uniform init, fully determined by the seed.
  void init(std::uint64_t seed);

  const MlpSpec& spec() const { return spec_; }
  std::vector<Mat>& weights() { return w_; }
  std::vector<Vec>& biases() { return b_; }
  const std::vector<Mat>& weights() const { return w_; }
  const std::vector<Vec>& biases() const { return b_; }
  size_t parameter_count() const;

  // Forward pass over a batch; cache may be null when no backward follows.
  TapActivations forward_with_taps(const std::vector<Vec>& inputs,
                                   ForwardCache* cache = nullptr) const;

  // Backprop of upstream gradients at the logits plus optional gradients
  // injected at each tap site (aligned with spec().tap_layers).
  Gradients backward(const ForwardCache& cache,
                     const std::vector<Vec>& dlogits,
                     const std::vector<std::vector<Vec>>& dtaps = {}) const;

  Gradients zero_gradients() const;

 private:
  MlpSpec spec_;
  std::vector<Mat> w_;
  std::vector<Vec> b_;
};

// Versioned binary checkpoint; identical runs produce identical bytes.
void save_checkpoint(const std::string& path, const Mlp& model);
Mlp load_checkpoint(const std::string& path);

}  // namespace cakd
