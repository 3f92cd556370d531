#include "gnas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "gnas/parallel.hpp"

namespace gnas {

Eigen::VectorXd rank_scores(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const auto n = static_cast<std::size_t>(values.size());
  if (n == 0) throw ValidationError("cannot rank an empty vector");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values(i)))
      throw ValidationError("non-finite value at position " + std::to_string(i));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values(a) < values(b); });

  Eigen::VectorXd ranks(values.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values(order[j + 1]) == values(order[i])) ++j;
    // tied block [i, j] gets the average of rank positions i+1 .. j+1
    const double avg = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks(order[t]) = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pair(const Eigen::Ref<const Eigen::VectorXd>& r,
                const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (r.size() != s.size()) throw ValidationError("rankings differ in length");
  if (r.size() < 2) throw ValidationError("rank correlation needs n >= 2");
}

bool all_distinct(const Eigen::Ref<const Eigen::VectorXd>& v) {
  std::vector<double> sorted(v.data(), v.data() + v.size());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
               const Eigen::Ref<const Eigen::VectorXd>& y) {
  const double n = static_cast<double>(x.size());
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double var_x = xc.squaredNorm() / n;
  const double var_y = yc.squaredNorm() / n;
  if (var_x == 0.0 || var_y == 0.0)
    throw ValidationError("rank correlation undefined: zero variance");
  return xc.dot(yc) / (n * std::sqrt(var_x) * std::sqrt(var_y));
}

/// Strict inversions (s_i > s_j for i < j) by merge counting; ties not counted.
long long count_inversions(std::vector<double>& v, std::vector<double>& scratch,
                           std::size_t lo, std::size_t hi) {
  if (hi - lo <= 1) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long inversions = count_inversions(v, scratch, lo, mid) +
                         count_inversions(v, scratch, mid, hi);
  std::size_t a = lo, b = mid, out = lo;
  while (a < mid && b < hi) {
    if (v[b] < v[a]) {
      inversions += static_cast<long long>(mid - a);
      scratch[out++] = v[b++];
    } else {
      scratch[out++] = v[a++];
    }
  }
  while (a < mid) scratch[out++] = v[a++];
  while (b < hi) scratch[out++] = v[b++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inversions;
}

long long tied_pairs(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  long long total = 0;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i;
    while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
    const long long t = static_cast<long long>(j - i + 1);
    total += t * (t - 1) / 2;
    i = j + 1;
  }
  return total;
}

}  // namespace

double spearman_rho(const Eigen::Ref<const Eigen::VectorXd>& r,
                    const Eigen::Ref<const Eigen::VectorXd>& s) {
  check_pair(r, s);
  if (all_distinct(r) && all_distinct(s)) {
    const double n = static_cast<double>(r.size());
    const double d2 = (r - s).squaredNorm();
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
  }
  return pearson(r, s);
}

double kendall_tau(const Eigen::Ref<const Eigen::VectorXd>& r,
                   const Eigen::Ref<const Eigen::VectorXd>& s) {
  check_pair(r, s);
  const auto n = static_cast<std::size_t>(r.size());
  const long long total_pairs = static_cast<long long>(n) * (static_cast<long long>(n) - 1) / 2;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (r(a) != r(b)) return r(a) < r(b);
    return s(a) < s(b);
  });

  long long ties_r = 0, ties_both = 0;
  std::size_t i = 0;
  while (i < n) {  // walk groups of equal r; count joint ties inside them
    std::size_t j = i;
    while (j + 1 < n && r(order[j + 1]) == r(order[i])) ++j;
    const long long t = static_cast<long long>(j - i + 1);
    ties_r += t * (t - 1) / 2;
    std::size_t a = i;
    while (a <= j) {
      std::size_t b = a;
      while (b + 1 <= j && s(order[b + 1]) == s(order[a])) ++b;
      const long long u = static_cast<long long>(b - a + 1);
      ties_both += u * (u - 1) / 2;
      a = b + 1;
    }
    i = j + 1;
  }
  std::vector<double> s_values(n);
  for (std::size_t idx = 0; idx < n; ++idx) s_values[idx] = s(order[idx]);
  const long long ties_s = tied_pairs(s_values);
  if (ties_r == total_pairs || ties_s == total_pairs)
    throw ValidationError("rank correlation undefined: zero variance");

  std::vector<double> scratch(n);
  const long long swaps = count_inversions(s_values, scratch, 0, n);
  const long long concordant_minus_discordant =
      total_pairs - ties_r - ties_s + ties_both - 2 * swaps;
  return static_cast<double>(concordant_minus_discordant) /
         static_cast<double>(total_pairs);
}

std::vector<CorrelationRow> correlation_experiment(const Evaluator& evaluator,
                                                   const SearchSpace& space,
                                                   const Dataset* data,
                                                   const CorrelationExperimentConfig& config,
                                                   Rng& rng) {
  if (config.n_paths < 10) throw ValidationError("correlation experiment needs >= 10 paths");
  if (config.subset_sizes.empty())
    throw ValidationError("correlation experiment needs at least one subset size");
  if (data != nullptr) {
    if (config.full_eval_size < 1)
      throw ValidationError("full_eval_size must be positive");
    for (int size : config.subset_sizes)
      if (size < 1 || size > config.full_eval_size)
        throw ValidationError("subset sizes must lie in [1, full_eval_size]");
  }

  Rng path_rng = rng.substream("correlation-paths");
  Rng batch_rng = rng.substream("correlation-batches");

  // distinct paths: duplicate draws would tie both rankings artificially
  std::vector<Path> paths;
  std::unordered_set<Path, PathHash> seen;
  paths.reserve(static_cast<std::size_t>(config.n_paths));
  long long attempts = 0;
  const long long attempt_budget = 1000LL * config.n_paths;
  while (static_cast<int>(paths.size()) < config.n_paths) {
    if (++attempts > attempt_budget)
      throw ValidationError("cannot sample enough distinct paths; the space may be "
                            "smaller than n_paths");
    Path p = uniform_sample(space, path_rng);
    if (seen.insert(p).second) paths.push_back(std::move(p));
  }

  auto evaluate_all = [&](const Batch& batch) {
    std::vector<EvaluationRecord> records(paths.size());
    parallel::parallel_for(paths.size(), [&](std::size_t i) {
      records[i] = evaluator.evaluate(paths[i], batch);
    });
    return records;
  };

  // subsets are prefixes of the one full evaluation draw, so each subset is a
  // genuine subset of the full set and subset == full is exact
  Batch full_batch;
  if (data != nullptr)
    full_batch = draw_batch(*data, data->val_idx, config.full_eval_size, batch_rng);
  auto subset_of = [&](int size) -> Batch {
    if (data == nullptr) return Batch{};
    Batch subset;
    subset.x = full_batch.x.leftCols(size);
    subset.y.assign(full_batch.y.begin(), full_batch.y.begin() + size);
    return subset;
  };

  const std::vector<EvaluationRecord> full = evaluate_all(full_batch);
  Eigen::VectorXd neg_full_accuracy(config.n_paths);
  for (int i = 0; i < config.n_paths; ++i)
    neg_full_accuracy(i) = -full[static_cast<std::size_t>(i)].accuracy;
  const Eigen::VectorXd full_ranks = rank_scores(neg_full_accuracy);

  std::vector<CorrelationRow> rows;
  rows.reserve(config.subset_sizes.size());
  for (int subset_size : config.subset_sizes) {
    const Batch subset = subset_of(subset_size);
    const std::vector<EvaluationRecord> records = evaluate_all(subset);
    Eigen::VectorXd stat(config.n_paths);
    for (int i = 0; i < config.n_paths; ++i) {
      const EvaluationRecord& rec = records[static_cast<std::size_t>(i)];
      stat(i) = config.subset_stat == RankStat::loss ? rec.loss : -rec.accuracy;
    }
    const Eigen::VectorXd subset_ranks = rank_scores(stat);
    rows.push_back(CorrelationRow{subset_size, spearman_rho(subset_ranks, full_ranks),
                                  kendall_tau(subset_ranks, full_ranks)});
  }
  return rows;
}

}  // namespace gnas
