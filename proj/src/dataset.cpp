#include "gnas/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gnas/util.hpp"

namespace gnas {

void Dataset::validate() const {
  if (num_classes < 2) throw ValidationError("dataset needs at least two classes");
  if (features.cols() != static_cast<Eigen::Index>(labels.size()))
    throw ValidationError("feature/label count mismatch");
  for (int label : labels)
    if (label < 0 || label >= num_classes)
      throw ValidationError("label out of range: " + std::to_string(label));
  auto in_range = [&](const std::vector<int>& idx) {
    return std::all_of(idx.begin(), idx.end(),
                       [&](int i) { return i >= 0 && i < size(); });
  };
  if (!in_range(train_idx) || !in_range(val_idx) || !in_range(test_idx))
    throw ValidationError("split index out of range");
  // train and val must not overlap; evaluation on training examples would
  // leak into the path ranking
  std::vector<int> train_sorted = train_idx;
  std::sort(train_sorted.begin(), train_sorted.end());
  for (int i : val_idx)
    if (std::binary_search(train_sorted.begin(), train_sorted.end(), i))
      throw ValidationError("train and val splits overlap at index " + std::to_string(i));
}

Batch Dataset::gather(const std::vector<int>& indices) const {
  Batch batch;
  batch.x.resize(features.rows(), static_cast<Eigen::Index>(indices.size()));
  batch.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    batch.x.col(static_cast<Eigen::Index>(i)) = features.col(indices[i]);
    batch.y.push_back(labels[static_cast<std::size_t>(indices[i])]);
  }
  return batch;
}

Dataset make_gaussian_mixture(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.dim < 1 || spec.train < 1 || spec.val < 1)
    throw ValidationError("invalid synthetic dataset spec");
  Rng root(spec.seed);
  Rng mean_rng = root.substream("means");
  Rng sample_rng = root.substream("samples");

  Eigen::MatrixXd means(spec.dim, spec.num_classes);
  for (int c = 0; c < spec.num_classes; ++c) {
    Eigen::VectorXd direction(spec.dim);
    for (int d = 0; d < spec.dim; ++d) direction(d) = mean_rng.normal();
    direction.normalize();
    means.col(c) = spec.cluster_radius * direction;
  }

  const int total = spec.train + spec.val + spec.test;
  Dataset data;
  data.num_classes = spec.num_classes;
  data.features.resize(spec.dim, total);
  data.labels.resize(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const int label = i % spec.num_classes;  // balanced classes
    data.labels[static_cast<std::size_t>(i)] = label;
    for (int d = 0; d < spec.dim; ++d)
      data.features(d, i) = means(d, label) + spec.noise_sigma * sample_rng.normal();
  }

  data.train_idx.resize(static_cast<std::size_t>(spec.train));
  std::iota(data.train_idx.begin(), data.train_idx.end(), 0);
  data.val_idx.resize(static_cast<std::size_t>(spec.val));
  std::iota(data.val_idx.begin(), data.val_idx.end(), spec.train);
  data.test_idx.resize(static_cast<std::size_t>(spec.test));
  std::iota(data.test_idx.begin(), data.test_idx.end(), spec.train + spec.val);
  data.validate();
  return data;
}

Dataset load_csv_dataset(const std::string& file, int num_classes,
                         double val_fraction, double test_fraction,
                         std::uint64_t split_seed) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open dataset file: " + file);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          labels.push_back(std::stoi(cell));
          first = false;
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw ValidationError("bad CSV cell '" + cell + "' in " + file);
      }
    }
    if (first) throw ValidationError("CSV row without label in " + file);
    if (width == 0) width = row.size();
    if (row.size() != width || width == 0)
      throw ValidationError("inconsistent CSV row width in " + file);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw ValidationError("dataset too small: " + file);

  Dataset data;
  data.num_classes = num_classes;
  data.features.resize(static_cast<Eigen::Index>(width),
                       static_cast<Eigen::Index>(rows.size()));
  data.labels = labels;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t d = 0; d < width; ++d)
      data.features(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)) = rows[i][d];

  std::vector<int> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(split_seed).substream("csv-split");
  for (std::size_t i = order.size(); i > 1; --i)  // Fisher-Yates
    std::swap(order[i - 1], order[rng.uniform_index(i)]);

  const auto n = static_cast<std::size_t>(rows.size());
  const auto n_val = static_cast<std::size_t>(static_cast<double>(n) * val_fraction);
  const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * test_fraction);
  if (n_val + n_test >= n) throw ValidationError("val/test fractions leave no training data");
  data.val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  data.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                       order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  data.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  data.validate();
  return data;
}

Batch draw_batch(const Dataset& data, const std::vector<int>& split_indices,
                 int batch_size, Rng& rng) {
  if (split_indices.empty()) throw ValidationError("cannot draw a batch from an empty split");
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  std::vector<int> picks;
  picks.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i)
    picks.push_back(split_indices[rng.uniform_index(split_indices.size())]);
  return data.gather(picks);
}

}  // namespace gnas
