#include "gnas/greedy_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnas/parallel.hpp"

namespace gnas {

std::vector<Path> sample_mixture(const SearchSpace& space, const CandidatePool& pool,
                                 double epsilon, int m, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw ValidationError("epsilon must lie in [0, 1]");
  if (m < 1) throw ValidationError("m must be positive");
  std::vector<Path> paths;
  paths.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    if (!pool.empty() && rng.bernoulli(epsilon))
      paths.push_back(pool.sample_uniform(rng));
    else
      paths.push_back(uniform_sample(space, rng));
  }
  return paths;
}

FilterResult filter_paths_full(const std::vector<Path>& candidates,
                               const Evaluator& evaluator, const Batch& val_batch, int k) {
  const int m = static_cast<int>(candidates.size());
  if (k < 1 || k > m) throw ValidationError("filter requires 1 <= k <= m");

  FilterResult result;
  result.evaluated.resize(candidates.size());
  parallel::parallel_for(candidates.size(), [&](std::size_t i) {
    try {
      result.evaluated[i] = evaluator.evaluate(candidates[i], val_batch);
    } catch (const std::exception& e) {
      throw RuntimeAbort("evaluation failed on path " + path_to_string(candidates[i]) +
                         ": " + e.what());
    }
  });

  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return result.evaluated[static_cast<std::size_t>(a)].loss <
           result.evaluated[static_cast<std::size_t>(b)].loss;
  });
  result.kept_indices.assign(order.begin(), order.begin() + k);
  return result;
}

std::vector<std::pair<Path, double>> filter_paths(const std::vector<Path>& candidates,
                                                  const Evaluator& evaluator,
                                                  const Batch& val_batch, int k) {
  const FilterResult full = filter_paths_full(candidates, evaluator, val_batch, k);
  std::vector<std::pair<Path, double>> kept;
  kept.reserve(full.kept_indices.size());
  for (int i : full.kept_indices) {
    const EvaluationRecord& record = full.evaluated[static_cast<std::size_t>(i)];
    kept.emplace_back(record.path, record.loss);
  }
  return kept;
}

double confidence(int m, int k, double q) {
  if (m < 0 || k < 0 || k > m) throw ValidationError("confidence requires 0 <= k <= m");
  if (q < 0.0 || q > 1.0) throw ValidationError("q must lie in [0, 1]");
  if (k == 0) return 1.0;
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;

  // sum the upper tail in log space, smallest terms first
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double lgamma_m1 = std::lgamma(static_cast<double>(m) + 1.0);
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(m - k + 1));
  for (int j = k; j <= m; ++j) {
    const double log_term = lgamma_m1 - std::lgamma(static_cast<double>(j) + 1.0) -
                            std::lgamma(static_cast<double>(m - j) + 1.0) +
                            static_cast<double>(j) * log_q +
                            static_cast<double>(m - j) * log_1mq;
    terms.push_back(std::exp(log_term));
  }
  std::sort(terms.begin(), terms.end());
  const double tail = std::accumulate(terms.begin(), terms.end(), 0.0);
  return std::clamp(tail, 0.0, 1.0);
}

double effective_q(double epsilon, double base_q) {
  if (epsilon < 0.0 || epsilon > 1.0 || base_q < 0.0 || base_q > 1.0)
    throw ValidationError("effective_q arguments must lie in [0, 1]");
  return epsilon + (1.0 - epsilon) * base_q;
}

}  // namespace gnas
