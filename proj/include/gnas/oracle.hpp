#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gnas/evaluator.hpp"

namespace gnas {

/// Deterministic per-path quality function that stands in for a trained
/// network: per-(layer, choice) scores, an optional pairwise interaction
/// between adjacent layers, and per-path pseudo-noise of scale noise_sigma.
/// Pure function of the path, so exhaustive ground truth is available.
/// `threshold` splits the space into good (loss <= threshold) and weak paths.
struct TabularOracle {
  std::vector<std::vector<double>> quality;  // [layer][choice]
  std::uint64_t interaction_seed = 0;
  double interaction_strength = 0.0;  // 0 disables the pairwise term
  double noise_sigma = 0.0;
  double threshold = 0.0;

  double loss(const Path& path) const;
  bool is_good(const Path& path) const { return loss(path) <= threshold; }
};

/// Fixed monotone map from oracle loss to a [0, 1] accuracy figure.
double oracle_accuracy(double loss);

/// Builds a homogeneous toy space (identity + affine choices, seeded costs)
/// together with an oracle whose threshold realizes `good_fraction` of good
/// paths: exactly (within 1/|A|) when the space is enumerable, by a sampling
/// estimate otherwise.
std::pair<SearchSpace, TabularOracle> make_oracle_space(int num_layers, int num_choices,
                                                        std::uint64_t seed,
                                                        double good_fraction,
                                                        double noise_sigma = 0.0,
                                                        double interaction_strength = 0.0);

/// Exact fraction of good paths by enumeration; requires an enumerable space.
double enumerate_good_fraction(const SearchSpace& space, const TabularOracle& oracle);

nlohmann::json oracle_to_json(const TabularOracle& oracle);
TabularOracle oracle_from_json(const nlohmann::json& j);
TabularOracle load_oracle_file(const std::string& file);
void save_oracle_file(const TabularOracle& oracle, const std::string& file);

/// Evaluator backend over a TabularOracle; the batch argument only feeds the
/// image accounting, the score ignores it. Not trainable.
class OracleEvaluator : public Evaluator {
 public:
  OracleEvaluator(const SearchSpace& space, TabularOracle oracle)
      : space_(space), oracle_(std::move(oracle)) {}

  EvaluationRecord evaluate(const Path& path, const Batch& batch) const override {
    validate_path(space_, path);
    const double loss = oracle_.loss(path);
    return EvaluationRecord{path, loss, oracle_accuracy(loss), batch.size()};
  }
  double train_on_batch(const Path& path, const Batch&, double) override {
    validate_path(space_, path);
    return oracle_.loss(path);
  }
  bool trainable() const override { return false; }

  const TabularOracle& oracle() const { return oracle_; }

 private:
  const SearchSpace& space_;
  TabularOracle oracle_;
};

}  // namespace gnas
