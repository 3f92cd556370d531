#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnas/candidate_pool.hpp"
#include "gnas/evaluator.hpp"

namespace gnas {

struct Individual {
  Path path;
  std::vector<double> objectives;  // minimized: (validation loss, flops)
  bool constraint_ok = false;
  std::optional<double> accuracy;
};

struct EvolutionConfig {
  int population_size = 50;
  int generations = 20;
  double mutation_prob_per_gene = 0.1;
  double crossover_prob = 0.9;
  Constraint constraint;
  std::uint64_t seed = 0;
  int offspring_attempt_budget = 1000;  // rejection tries per offspring slot

  void validate() const;
};

/// Constraint-satisfying initial population: the pool's best entries first,
/// any shortfall filled by uniform rejection sampling. Objectives are not yet
/// evaluated. Throws RuntimeAbort when the constraint cannot be met within
/// the attempt budget.
std::vector<Individual> init_population(const CandidatePool* pool, const SearchSpace& space,
                                        const Constraint& constraint, int n, Rng& rng,
                                        int attempt_budget = 1000);

/// Nondominated fronts of the population, best front first. Returns index
/// lists into `population`. Dominance is <= in all objectives, < in at least
/// one (minimization).
std::vector<std::vector<int>> fast_non_dominated_sort(const std::vector<Individual>& population);

/// Standard NSGA-II crowding distances for one front: boundary individuals
/// get +infinity, interior ones the sum of range-normalized neighbor gaps.
/// A degenerate objective (max == min) contributes zero.
std::vector<double> crowding_distance(const std::vector<Individual>& front);

struct EvaluationSetEntry {
  Path path;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct GenerationSummary {
  int generation = 0;
  std::vector<std::size_t> front_sizes;            // fronts of parents + offspring
  std::size_t boundary_front_size = 0;
  std::vector<std::vector<double>> front0_objectives;
  std::vector<std::vector<double>> next_parent_objectives;
};

struct EvolveResult {
  Path best;
  double best_accuracy = 0.0;
  CostSummary best_cost;
  std::vector<EvaluationSetEntry> evaluation_set;  // append order, unique paths
  std::vector<GenerationSummary> generations;
};

/// Constrained multi-objective path search: elitist generational loop with
/// binary tournament, uniform crossover and per-gene mutation; offspring that
/// violate the constraint are ditched and regenerated. Each generation's
/// boundary front is evaluated on the validation batch and appended to the
/// evaluation set; the final population is evaluated at termination. Returns
/// the highest-accuracy path seen (ties: lower flops, then lexicographic).
EvolveResult evolve(const SearchSpace& space, const Evaluator& evaluator,
                    const CandidatePool* pool, const EvolutionConfig& config,
                    const Batch& val_batch);

}  // namespace gnas
