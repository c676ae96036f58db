#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cakd/prob.hpp"

namespace cakd {

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::vector<Vec> inputs;
  std::vector<int> labels;
  int class_count = 0;

  size_t size() const { return inputs.size(); }
  int input_width() const {
    return inputs.empty() ? 0 : static_cast<int>(inputs.front().size());
  }
  void validate() const;
};

// Big-endian IDX files (magic 0x803 for images, 0x801 for labels); pixels are
// scaled by 1/255 and images flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with a header row; the column named "label" holds the class index and
// every other column is a numeric feature.
Dataset load_csv(const std::string& path);

// Seeded Gaussian blobs: class centers are orthonormal directions scaled so
// all pairwise center distances equal 1 (requires dim >= classes), samples
// are center + spread * standard normal. Centers are a fixed function of
// (classes, dim); the seed only drives the sample noise, so two datasets with
// different seeds share the same underlying task.
Dataset generate_blobs(std::uint64_t seed, int classes, int per_class, int dim,
                       double spread);

// Seeded Fisher-Yates shuffle split into batches; the final short batch is
// kept. Deterministic for a given (seed, epoch).
std::vector<std::vector<int>> batches(size_t n, int batch_size,
                                      std::uint64_t seed, int epoch);

}  // namespace cakd
