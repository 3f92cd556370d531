#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gnas/evaluator.hpp"

namespace gnas {

/// Ascending fractional ranks (1-based); ties receive the average of their
/// rank positions. Throws on non-finite input.
Eigen::VectorXd rank_scores(const Eigen::Ref<const Eigen::VectorXd>& values);

/// Spearman rank correlation of two rank vectors: the 1 - 6*sum(d^2)/(n(n^2-1))
/// closed form when both rankings are distinct, Pearson on the ranks when ties
/// are present. Throws when either ranking has zero variance.
double spearman_rho(const Eigen::Ref<const Eigen::VectorXd>& r,
                    const Eigen::Ref<const Eigen::VectorXd>& s);

/// Kendall rank correlation, (concordant - discordant) / all pairs, with tied
/// pairs counting as neither. O(n log n) via merge counting.
double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& r,
                   const Eigen::Ref<const Eigen::VectorXd>& s);

enum class RankStat { loss, accuracy };

struct CorrelationRow {
  int subset_size = 0;
  double spearman = 0.0;
  double kendall = 0.0;
};

struct CorrelationExperimentConfig {
  int n_paths = 1000;
  std::vector<int> subset_sizes;
  int full_eval_size = 0;
  RankStat subset_stat = RankStat::loss;  // statistic used on the subset side
};

/// Subset-evaluation consistency study: samples n_paths uniformly, ranks them
/// by the subset statistic on each subset size and by accuracy on the full
/// evaluation set, and reports both correlation coefficients per size.
/// `data` may be null for backends that ignore batches.
std::vector<CorrelationRow> correlation_experiment(const Evaluator& evaluator,
                                                   const SearchSpace& space,
                                                   const Dataset* data,
                                                   const CorrelationExperimentConfig& config,
                                                   Rng& rng);

}  // namespace gnas
