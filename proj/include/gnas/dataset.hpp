#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gnas/rng.hpp"

namespace gnas {

/// Materialized mini-batch; one example per column.
struct Batch {
  Eigen::MatrixXd x;
  std::vector<int> y;

  int size() const { return static_cast<int>(y.size()); }
  bool empty() const { return y.empty(); }
};

/// Labeled examples with disjoint train/val/test splits. Feature matrix holds
/// one example per column.
struct Dataset {
  Eigen::MatrixXd features;  // dim x n
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  std::vector<int> test_idx;

  int dim() const { return static_cast<int>(features.rows()); }
  int size() const { return static_cast<int>(labels.size()); }
  void validate() const;

  Batch gather(const std::vector<int>& indices) const;
};

struct SyntheticSpec {
  int num_classes = 4;
  int dim = 8;
  int train = 2048;
  int val = 512;
  int test = 0;
  double cluster_radius = 3.0;  // distance of class means from the origin
  double noise_sigma = 1.0;
  std::uint64_t seed = 0;
};

/// Seeded Gaussian-mixture classification set; self-contained stand-in for an
/// external dataset. Class means are drawn once, examples drawn around them.
Dataset make_gaussian_mixture(const SyntheticSpec& spec);

/// CSV loader: integer label in the first column, features after it.
/// Rows are shuffled with `split_seed` and cut into train/val/test fractions.
Dataset load_csv_dataset(const std::string& file, int num_classes,
                         double val_fraction, double test_fraction,
                         std::uint64_t split_seed);

/// Draws `batch_size` examples (with replacement) from the given split.
Batch draw_batch(const Dataset& data, const std::vector<int>& split_indices,
                 int batch_size, Rng& rng);

}  // namespace gnas
