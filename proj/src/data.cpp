#include "cakd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cakd {

void Dataset::validate() const {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw FormatError("dataset: empty or misaligned inputs/labels");
  }
  const size_t width = inputs.front().size();
  for (const Vec& x : inputs) {
    if (x.size() != width) throw FormatError("dataset: ragged input widths");
  }
  for (int y : labels) {
    if (y < 0 || y >= class_count) throw FormatError("dataset: label out of range");
  }
}

static std::uint32_t read_be32(std::ifstream& is, const char* what) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw FormatError(std::string("idx: truncated ") + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw FormatError("idx: cannot open " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw FormatError("idx: cannot open " + labels_path);

  if (read_be32(imgs, "image header") != 0x00000803u) {
    throw FormatError("idx: bad image magic");
  }
  const std::uint32_t n_images = read_be32(imgs, "image count");
  const std::uint32_t rows = read_be32(imgs, "row count");
  const std::uint32_t cols = read_be32(imgs, "column count");

  if (read_be32(labs, "label header") != 0x00000801u) {
    throw FormatError("idx: bad label magic");
  }
  const std::uint32_t n_labels = read_be32(labs, "label count");
  if (n_images != n_labels) {
    throw FormatError("idx: image/label count mismatch");
  }

  const size_t pixels = static_cast<size_t>(rows) * cols;
  Dataset ds;
  ds.inputs.reserve(n_images);
  ds.labels.reserve(n_images);
  std::vector<unsigned char> buf(pixels);
  int max_label = 0;
  for (std::uint32_t n = 0; n < n_images; ++n) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!imgs) throw FormatError("idx: truncated image data");
    Vec x(pixels);
    for (size_t i = 0; i < pixels; ++i) x[i] = buf[i] / 255.0;
    ds.inputs.push_back(std::move(x));

    const int label = labs.get();
    if (label == EOF) throw FormatError("idx: truncated label data");
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.class_count = max_label + 1;
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("csv: missing header");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int label_col = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = static_cast<int>(i);
  }
  if (label_col < 0) throw FormatError("csv: no 'label' column");

  Dataset ds;
  int max_label = 0;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Vec x;
    int label = -1;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (col == label_col) {
          label = std::stoi(cell);
        } else {
          x.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw FormatError("csv: bad numeric value at line " + std::to_string(lineno));
      }
      ++col;
    }
    if (col != static_cast<int>(header.size()) || label < 0) {
      throw FormatError("csv: malformed row at line " + std::to_string(lineno));
    }
    max_label = std::max(max_label, label);
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  ds.class_count = max_label + 1;
  ds.validate();
  return ds;
}

Dataset generate_blobs(std::uint64_t seed, int classes, int per_class, int dim,
                       double spread) {
  if (classes < 2 || per_class < 1 || dim < 1 || !(spread > 0.0)) {
    throw std::invalid_argument("generate_blobs: invalid parameters");
  }
  if (dim < classes) {
    throw std::invalid_argument(
        "generate_blobs: dim must be >= classes for unit-distance centers");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Centers depend only on (classes, dim) so datasets drawn with different
  // sample seeds describe the same classification task.
  std::mt19937_64 center_rng(0x626c6f62ULL ^ (static_cast<std::uint64_t>(classes) << 32) ^
                             static_cast<std::uint64_t>(dim));
  std::normal_distribution<double> center_gauss(0.0, 1.0);

  // Gram-Schmidt an orthonormal direction per class, then scale by 1/sqrt(2)
  // so every pairwise center distance is exactly 1.
  std::vector<Vec> centers;
  while (static_cast<int>(centers.size()) < classes) {
    Vec v(dim);
    for (double& e : v) e = center_gauss(center_rng);
    for (const Vec& c : centers) {
      double dot = 0.0;
      for (int i = 0; i < dim; ++i) dot += v[i] * c[i];
      for (int i = 0; i < dim; ++i) v[i] -= dot * c[i];
    }
    double norm = 0.0;
    for (double e : v) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;  // rare degenerate draw, resample
    for (double& e : v) e /= norm;
    centers.push_back(std::move(v));
  }
  const double scale = 1.0 / std::sqrt(2.0);

  Dataset ds;
  ds.class_count = classes;
  for (int c = 0; c < classes; ++c) {
    for (int n = 0; n < per_class; ++n) {
      Vec x(dim);
      for (int i = 0; i < dim; ++i) {
        x[i] = scale * centers[c][i] + spread * gauss(rng);
      }
      ds.inputs.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  ds.validate();
  return ds;
}

std::vector<std::vector<int>> batches(size_t n, int batch_size,
                                      std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be >= 1");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(epoch) + 1)));
  for (size_t i = n; i > 1; --i) {
    const size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<int>> out;
  for (size_t start = 0; start < n; start += batch_size) {
    const size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

}  // namespace cakd
