#include "gnas/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "gnas/parallel.hpp"

namespace gnas {

void EvolutionConfig::validate() const {
  if (population_size < 2) throw ValidationError("population_size must be at least 2");
  if (generations < 0) throw ValidationError("generations must be non-negative");
  if (mutation_prob_per_gene < 0.0 || mutation_prob_per_gene > 1.0 ||
      crossover_prob < 0.0 || crossover_prob > 1.0)
    throw ValidationError("probabilities must lie in [0, 1]");
  if (!constraint.any())
    throw ValidationError("search constraint must set at least one bound");
  if (offspring_attempt_budget < 1)
    throw ValidationError("offspring_attempt_budget must be positive");
}

std::vector<Individual> init_population(const CandidatePool* pool, const SearchSpace& space,
                                        const Constraint& constraint, int n, Rng& rng,
                                        int attempt_budget) {
  if (n < 1) throw ValidationError("population size must be positive");
  std::vector<Individual> population;
  population.reserve(static_cast<std::size_t>(n));
  std::unordered_map<Path, bool, PathHash> seen;

  if (pool != nullptr && !pool->empty()) {
    for (const PoolEntry& entry : pool->top_n(pool->size())) {
      if (static_cast<int>(population.size()) >= n) break;
      if (!check_constraint(constraint, path_cost(space, entry.path))) continue;
      population.push_back(Individual{entry.path, {}, true, {}});
    }
  }
  long long attempts = 0;
  const long long budget =
      static_cast<long long>(attempt_budget) * std::max(1, n);
  while (static_cast<int>(population.size()) < n) {
    if (++attempts > budget)
      throw RuntimeAbort("could not fill the initial population under the constraint; "
                         "it may exclude all paths");
    const Path path = uniform_sample(space, rng);
    if (!check_constraint(constraint, path_cost(space, path))) continue;
    population.push_back(Individual{path, {}, true, {}});
  }
  return population;
}

std::vector<std::vector<int>> fast_non_dominated_sort(const std::vector<Individual>& population) {
  const int n = static_cast<int>(population.size());
  for (const Individual& ind : population) {
    if (ind.objectives.empty())
      throw ValidationError("individual without objectives in nondominated sort");
    for (double v : ind.objectives)
      if (!std::isfinite(v)) throw ValidationError("non-finite objective value");
  }
  auto dominates = [&](int a, int b) {
    const auto& fa = population[static_cast<std::size_t>(a)].objectives;
    const auto& fb = population[static_cast<std::size_t>(b)].objectives;
    bool strictly_better = false;
    for (std::size_t i = 0; i < fa.size(); ++i) {
      if (fa[i] > fb[i]) return false;
      if (fa[i] < fb[i]) strictly_better = true;
    }
    return strictly_better;
  };

  std::vector<std::vector<int>> dominated_by(static_cast<std::size_t>(n));
  std::vector<int> domination_count(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> fronts;
  std::vector<int> current;
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(p, q))
        dominated_by[static_cast<std::size_t>(p)].push_back(q);
      else if (dominates(q, p))
        ++domination_count[static_cast<std::size_t>(p)];
    }
    if (domination_count[static_cast<std::size_t>(p)] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<int> next;
    for (int p : current)
      for (int q : dominated_by[static_cast<std::size_t>(p)])
        if (--domination_count[static_cast<std::size_t>(q)] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());  // stable front ordering by index
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<Individual>& front) {
  if (front.empty()) throw ValidationError("crowding distance of an empty front");
  const std::size_t n = front.size();
  const std::size_t n_obj = front.front().objectives.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), kInf);
    return distance;
  }
  std::vector<int> order(n);
  for (std::size_t m = 0; m < n_obj; ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return front[static_cast<std::size_t>(a)].objectives[m] <
             front[static_cast<std::size_t>(b)].objectives[m];
    });
    const double lo = front[static_cast<std::size_t>(order.front())].objectives[m];
    const double hi = front[static_cast<std::size_t>(order.back())].objectives[m];
    distance[static_cast<std::size_t>(order.front())] = kInf;
    distance[static_cast<std::size_t>(order.back())] = kInf;
    if (hi == lo) continue;  // degenerate objective contributes nothing
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double gap =
          front[static_cast<std::size_t>(order[i + 1])].objectives[m] -
          front[static_cast<std::size_t>(order[i - 1])].objectives[m];
      distance[static_cast<std::size_t>(order[i])] += gap / (hi - lo);
    }
  }
  return distance;
}

namespace {

struct Memo {
  std::unordered_map<Path, EvaluationRecord, PathHash> records;
  std::unordered_map<Path, CostSummary, PathHash> costs;

  const CostSummary& cost(const SearchSpace& space, const Path& path) {
    auto it = costs.find(path);
    if (it == costs.end()) it = costs.emplace(path, path_cost(space, path)).first;
    return it->second;
  }
};

/// Fills records for any paths missing from the memo, fanning out evaluation.
void evaluate_missing(const std::vector<Individual>& population, const Evaluator& evaluator,
                      const Batch& val_batch, Memo& memo) {
  std::vector<const Path*> missing;
  for (const Individual& ind : population)
    if (memo.records.find(ind.path) == memo.records.end()) {
      memo.records.emplace(ind.path, EvaluationRecord{});  // reserve the slot
      missing.push_back(&ind.path);
    }
  std::vector<EvaluationRecord> results(missing.size());
  parallel::parallel_for(missing.size(), [&](std::size_t i) {
    results[i] = evaluator.evaluate(*missing[i], val_batch);
  });
  for (std::size_t i = 0; i < missing.size(); ++i)
    memo.records[*missing[i]] = results[i];
}

void fill_objectives(std::vector<Individual>& population, const SearchSpace& space,
                     Memo& memo) {
  for (Individual& ind : population) {
    const EvaluationRecord& rec = memo.records.at(ind.path);
    ind.objectives = {rec.loss, static_cast<double>(memo.cost(space, ind.path).flops)};
    ind.accuracy = rec.accuracy;
  }
}

struct RankedPopulation {
  std::vector<int> rank;
  std::vector<double> crowding;
};

RankedPopulation rank_population(const std::vector<Individual>& population) {
  RankedPopulation ranked;
  ranked.rank.assign(population.size(), 0);
  ranked.crowding.assign(population.size(), 0.0);
  const auto fronts = fast_non_dominated_sort(population);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    std::vector<Individual> front;
    front.reserve(fronts[f].size());
    for (int idx : fronts[f]) front.push_back(population[static_cast<std::size_t>(idx)]);
    const std::vector<double> dist = crowding_distance(front);
    for (std::size_t i = 0; i < fronts[f].size(); ++i) {
      ranked.rank[static_cast<std::size_t>(fronts[f][i])] = static_cast<int>(f);
      ranked.crowding[static_cast<std::size_t>(fronts[f][i])] = dist[i];
    }
  }
  return ranked;
}

int tournament_pick(const RankedPopulation& ranked, std::size_t pop_size, Rng& rng) {
  const int a = static_cast<int>(rng.uniform_index(pop_size));
  const int b = static_cast<int>(rng.uniform_index(pop_size));
  const auto ia = static_cast<std::size_t>(a);
  const auto ib = static_cast<std::size_t>(b);
  if (ranked.rank[ia] != ranked.rank[ib]) return ranked.rank[ia] < ranked.rank[ib] ? a : b;
  if (ranked.crowding[ia] != ranked.crowding[ib])
    return ranked.crowding[ia] > ranked.crowding[ib] ? a : b;
  return std::min(a, b);
}

std::vector<Individual> make_new_pop(const std::vector<Individual>& parents,
                                     const SearchSpace& space, const EvolutionConfig& config,
                                     Rng& rng) {
  const RankedPopulation ranked = rank_population(parents);
  std::vector<Individual> offspring;
  offspring.reserve(static_cast<std::size_t>(config.population_size));
  while (static_cast<int>(offspring.size()) < config.population_size) {
    int attempts = 0;
    while (true) {
      if (++attempts > config.offspring_attempt_budget)
        throw RuntimeAbort("offspring generation exhausted its attempt budget "
                           "under the constraint");
      const Individual& p1 =
          parents[static_cast<std::size_t>(tournament_pick(ranked, parents.size(), rng))];
      const Individual& p2 =
          parents[static_cast<std::size_t>(tournament_pick(ranked, parents.size(), rng))];
      Path child = p1.path;
      if (rng.bernoulli(config.crossover_prob)) {
        for (std::size_t l = 0; l < child.ops.size(); ++l)
          if (rng.bernoulli(0.5)) child.ops[l] = p2.path.ops[l];
      }
      for (std::size_t l = 0; l < child.ops.size(); ++l)
        if (rng.bernoulli(config.mutation_prob_per_gene))
          child.ops[l] = static_cast<int>(
              rng.uniform_index(space.layers[l].choices.size()));
      if (!check_constraint(config.constraint, path_cost(space, child)))
        continue;  // ditch constraint violators for good
      offspring.push_back(Individual{std::move(child), {}, true, {}});
      break;
    }
  }
  return offspring;
}

}  // namespace

EvolveResult evolve(const SearchSpace& space, const Evaluator& evaluator,
                    const CandidatePool* pool, const EvolutionConfig& config,
                    const Batch& val_batch) {
  space.validate();
  config.validate();
  Rng rng = Rng(config.seed).substream("evolution");

  std::vector<Individual> parents = init_population(
      pool, space, config.constraint, config.population_size, rng,
      config.offspring_attempt_budget);

  Memo memo;
  EvolveResult result;
  std::unordered_map<Path, bool, PathHash> in_eval_set;

  auto append_to_eval_set = [&](const Path& path) {
    if (in_eval_set.count(path) != 0) return;
    in_eval_set.emplace(path, true);
    const EvaluationRecord& rec = memo.records.at(path);
    result.evaluation_set.push_back(EvaluationSetEntry{path, rec.accuracy, rec.loss});
  };

  evaluate_missing(parents, evaluator, val_batch, memo);
  fill_objectives(parents, space, memo);

  for (int gen = 0; gen < config.generations; ++gen) {
    std::vector<Individual> offspring = make_new_pop(parents, space, config, rng);
    evaluate_missing(offspring, evaluator, val_batch, memo);
    fill_objectives(offspring, space, memo);

    std::vector<Individual> combined = parents;
    combined.insert(combined.end(), offspring.begin(), offspring.end());
    const auto fronts = fast_non_dominated_sort(combined);

    GenerationSummary summary;
    summary.generation = gen;
    for (const auto& front : fronts) summary.front_sizes.push_back(front.size());
    for (int idx : fronts.front())
      summary.front0_objectives.push_back(combined[static_cast<std::size_t>(idx)].objectives);

    std::vector<Individual> next;
    next.reserve(static_cast<std::size_t>(config.population_size));
    std::size_t j = 0;
    while (j < fronts.size() &&
           next.size() + fronts[j].size() <= static_cast<std::size_t>(config.population_size)) {
      for (int idx : fronts[j]) next.push_back(combined[static_cast<std::size_t>(idx)]);
      ++j;
    }

    // the boundary front is scored with validation data; its members join the
    // evaluation set and the best-accuracy ones fill the remaining seats
    if (j < fronts.size()) {
      std::vector<int> boundary = fronts[j];
      summary.boundary_front_size = boundary.size();
      for (int idx : boundary) append_to_eval_set(combined[static_cast<std::size_t>(idx)].path);
      std::stable_sort(boundary.begin(), boundary.end(), [&](int a, int b) {
        return *combined[static_cast<std::size_t>(a)].accuracy >
               *combined[static_cast<std::size_t>(b)].accuracy;
      });
      const std::size_t seats = static_cast<std::size_t>(config.population_size) - next.size();
      for (std::size_t i = 0; i < seats && i < boundary.size(); ++i)
        next.push_back(combined[static_cast<std::size_t>(boundary[i])]);
    }

    for (const Individual& ind : next)
      summary.next_parent_objectives.push_back(ind.objectives);
    result.generations.push_back(std::move(summary));
    parents = std::move(next);
  }

  // score the final population too, so the evaluation set is never empty
  for (const Individual& ind : parents) append_to_eval_set(ind.path);

  if (result.evaluation_set.empty())
    throw RuntimeAbort("evolution produced an empty evaluation set");
  const EvaluationSetEntry* best = &result.evaluation_set.front();
  for (const EvaluationSetEntry& entry : result.evaluation_set) {
    if (entry.accuracy > best->accuracy) {
      best = &entry;
      continue;
    }
    if (entry.accuracy == best->accuracy) {
      const long long entry_flops = memo.cost(space, entry.path).flops;
      const long long best_flops = memo.cost(space, best->path).flops;
      if (entry_flops < best_flops ||
          (entry_flops == best_flops && entry.path.ops < best->path.ops))
        best = &entry;
    }
  }
  result.best = best->path;
  result.best_accuracy = best->accuracy;
  result.best_cost = path_cost(space, result.best);
  return result;
}

}  // namespace gnas
