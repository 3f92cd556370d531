#pragma once

#include <utility>
#include <vector>

#include "gnas/candidate_pool.hpp"
#include "gnas/evaluator.hpp"

namespace gnas {

struct FilterConfig {
  int m = 10;               // paths sampled per round
  int k = 5;                // paths kept
  int val_subset_size = 0;  // images per evaluation; 0 = auto: max(64, 2% of val)

  void validate() const {
    if (k < 1 || k > m) throw ValidationError("filter requires 1 <= k <= m");
    if (val_subset_size < 0)
      throw ValidationError("val_subset_size must be non-negative");
  }
};

/// Exploration/exploitation draw: each of the m paths independently comes
/// from the pool with probability epsilon (uniform over entries), otherwise
/// uniformly from the whole space. An empty pool falls back to pure uniform.
std::vector<Path> sample_mixture(const SearchSpace& space, const CandidatePool& pool,
                                 double epsilon, int m, Rng& rng);

struct FilterResult {
  std::vector<EvaluationRecord> evaluated;  // one per candidate, input order
  std::vector<int> kept_indices;            // k indices, ascending loss
};

/// Evaluates all candidates on the validation batch and keeps the k with the
/// smallest loss (ties: earlier candidate wins). Candidate evaluation fans out
/// over the configured thread budget.
FilterResult filter_paths_full(const std::vector<Path>& candidates,
                               const Evaluator& evaluator, const Batch& val_batch, int k);

/// The kept (path, loss) pairs only, ascending by loss.
std::vector<std::pair<Path, double>> filter_paths(const std::vector<Path>& candidates,
                                                  const Evaluator& evaluator,
                                                  const Batch& val_batch, int k);

/// Exact binomial upper tail: probability that at least k of m uniform draws
/// land in the good set when each draw is good with probability q.
double confidence(int m, int k, double q);

/// Good-draw probability under epsilon-mixture sampling when the pool holds
/// only good paths: epsilon + (1 - epsilon) * base_q.
double effective_q(double epsilon, double base_q);

}  // namespace gnas
