#include "cakd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace cakd {

void MlpSpec::validate() const {
  if (widths.size() < 3) {
    throw std::invalid_argument("MlpSpec: need at least one hidden layer");
  }
  for (int w : widths) {
    if (w < 1) throw std::invalid_argument("MlpSpec: widths must be positive");
  }
  for (int t : tap_layers) {
    if (t < 1 || t > hidden_layers()) {
      throw std::invalid_argument("MlpSpec: tap index out of range");
    }
  }
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  const int layers = static_cast<int>(spec_.widths.size()) - 1;
  for (int l = 0; l < layers; ++l) {
    w_.emplace_back(spec_.widths[l + 1], spec_.widths[l]);
    b_.emplace_back(spec_.widths[l + 1], 0.0);
  }
}

void Mlp::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l < w_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w_[l].cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w_[l].a) v = dist(rng);
    for (double& v : b_[l]) v = dist(rng);
  }
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < w_.size(); ++l) n += w_[l].a.size() + b_[l].size();
  return n;
}

static double activate(double x, Activation act) {
  return act == Activation::Relu ? std::max(x, 0.0) : std::tanh(x);
}

static double activate_grad(double pre, Activation act) {
  if (act == Activation::Relu) return pre > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(pre);
  return 1.0 - t * t;
}

TapActivations Mlp::forward_with_taps(const std::vector<Vec>& inputs,
                                      ForwardCache* cache) const {
  const int layers = static_cast<int>(w_.size());
  TapActivations taps;
  taps.taps.resize(spec_.tap_layers.size());
  if (cache) {
    cache->inputs = inputs;
    cache->pre.assign(layers, {});
    cache->act.assign(layers, {});
  }

  for (const Vec& x : inputs) {
    if (static_cast<int>(x.size()) != spec_.input_width()) {
      throw std::invalid_argument("forward_with_taps: input width mismatch");
    }
    Vec cur = x;
    for (int l = 0; l < layers; ++l) {
      Vec pre(w_[l].rows);
      for (int i = 0; i < w_[l].rows; ++i) {
        double s = b_[l][i];
        const double* row = &w_[l].a[static_cast<size_t>(i) * w_[l].cols];
        for (int j = 0; j < w_[l].cols; ++j) s += row[j] * cur[j];
        pre[i] = s;
      }
      const bool last = l == layers - 1;
      Vec out = pre;
      if (!last) {
        for (double& v : out) v = activate(v, spec_.activation);
      }
      if (cache) {
        cache->pre[l].push_back(pre);
        cache->act[l].push_back(out);
      }
      if (!last) {
        for (size_t t = 0; t < spec_.tap_layers.size(); ++t) {
          if (spec_.tap_layers[t] == l + 1) taps.taps[t].push_back(out);
        }
      }
      cur = std::move(out);
    }
    taps.logits.push_back(std::move(cur));
  }
  return taps;
}

Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (size_t l = 0; l < w_.size(); ++l) {
    g.dw.emplace_back(w_[l].rows, w_[l].cols);
    g.db.emplace_back(b_[l].size(), 0.0);
  }
  return g;
}

Gradients Mlp::backward(const ForwardCache& cache,
                        const std::vector<Vec>& dlogits,
                        const std::vector<std::vector<Vec>>& dtaps) const {
  const int layers = static_cast<int>(w_.size());
  const size_t batch = cache.inputs.size();
  if (dlogits.size() != batch) {
    throw std::invalid_argument("backward: dlogits batch mismatch");
  }
  if (!dtaps.empty() && dtaps.size() != spec_.tap_layers.size()) {
    throw std::invalid_argument("backward: tap gradient site mismatch");
  }

  Gradients g = zero_gradients();
  for (size_t n = 0; n < batch; ++n) {
    Vec delta = dlogits[n];  // gradient w.r.t. current layer pre-activation
    for (int l = layers - 1; l >= 0; --l) {
      const Vec& in = l == 0 ? cache.inputs[n] : cache.act[l - 1][n];
      for (int i = 0; i < w_[l].rows; ++i) {
        g.db[l][i] += delta[i];
        double* row = &g.dw[l].a[static_cast<size_t>(i) * w_[l].cols];
        for (int j = 0; j < w_[l].cols; ++j) row[j] += delta[i] * in[j];
      }
      if (l == 0) break;
      Vec prev(w_[l].cols, 0.0);
      for (int i = 0; i < w_[l].rows; ++i) {
        const double* row = &w_[l].a[static_cast<size_t>(i) * w_[l].cols];
        for (int j = 0; j < w_[l].cols; ++j) prev[j] += row[j] * delta[i];
      }
      // Inject tap gradients at the post-activation of hidden layer l.
      if (!dtaps.empty()) {
        for (size_t t = 0; t < spec_.tap_layers.size(); ++t) {
          if (spec_.tap_layers[t] == l && !dtaps[t].empty()) {
            const Vec& dt = dtaps[t][n];
            if (dt.size() != prev.size()) {
              throw std::invalid_argument("backward: tap gradient width mismatch");
            }
            for (size_t j = 0; j < prev.size(); ++j) prev[j] += dt[j];
          }
        }
      }
      for (size_t j = 0; j < prev.size(); ++j) {
        prev[j] *= activate_grad(cache.pre[l - 1][n][j], spec_.activation);
      }
      delta = std::move(prev);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint format: "CAKD1" magic, u32 width count, widths, u8 activation,
// u32 tap count, tap indices, then all parameters as little-endian f64 in
// layer order (W1, b1, W2, b2, ...).

static void write_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<char*>(buf), 4);
}

static std::uint32_t read_u32(std::ifstream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(buf[0]) | (std::uint32_t(buf[1]) << 8) |
         (std::uint32_t(buf[2]) << 16) | (std::uint32_t(buf[3]) << 24);
}

static void write_f64(std::ofstream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<char*>(buf), 8);
}

static double read_f64(std::ifstream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void save_checkpoint(const std::string& path, const Mlp& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write("CAKD1", 5);
  const MlpSpec& spec = model.spec();
  write_u32(os, static_cast<std::uint32_t>(spec.widths.size()));
  for (int w : spec.widths) write_u32(os, static_cast<std::uint32_t>(w));
  os.put(static_cast<char>(spec.activation));
  write_u32(os, static_cast<std::uint32_t>(spec.tap_layers.size()));
  for (int t : spec.tap_layers) write_u32(os, static_cast<std::uint32_t>(t));
  for (size_t l = 0; l < model.weights().size(); ++l) {
    for (double v : model.weights()[l].a) write_f64(os, v);
    for (double v : model.biases()[l]) write_f64(os, v);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "CAKD1", 5) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  MlpSpec spec;
  const std::uint32_t n_widths = read_u32(is);
  if (n_widths < 3 || n_widths > 64) {
    throw std::runtime_error("checkpoint: implausible layer count");
  }
  for (std::uint32_t i = 0; i < n_widths; ++i) {
    spec.widths.push_back(static_cast<int>(read_u32(is)));
  }
  const int act = is.get();
  if (act != 0 && act != 1) throw std::runtime_error("checkpoint: bad activation code");
  spec.activation = static_cast<Activation>(act);
  const std::uint32_t n_taps = read_u32(is);
  for (std::uint32_t i = 0; i < n_taps; ++i) {
    spec.tap_layers.push_back(static_cast<int>(read_u32(is)));
  }

  Mlp model(spec);
  for (size_t l = 0; l < model.weights().size(); ++l) {
    for (double& v : model.weights()[l].a) v = read_f64(is);
    for (double& v : model.biases()[l]) v = read_f64(is);
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return model;
}

}  // namespace cakd
