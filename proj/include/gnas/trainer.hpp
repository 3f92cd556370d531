#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnas/candidate_pool.hpp"
#include "gnas/evaluator.hpp"
#include "gnas/greedy_filter.hpp"

namespace gnas {

/// Pool-sampling probability over training: 0 through warm-up, then linear
/// from 0 to `target` over `ramp_iters` optimizer steps, constant after.
struct EpsilonSchedule {
  double target = 0.8;
  long long ramp_iters = 0;
  long long warmup_iters = 0;
};

double epsilon_at(const EpsilonSchedule& schedule, long long iter);

/// Stop once the pool turnover has fallen to the tolerance: pi <= alpha.
bool should_stop(double pi, double alpha);

/// Accumulated image counts: whole optimization steps vs forward-only
/// evaluation, plus the empirical cost ratio between the two.
struct CostLedger {
  long long optimization_images = 0;
  long long evaluation_images = 0;
  double eval_cost_factor = 3.33;
};

/// Total cost in optimization-equivalent images:
/// optimization_images + evaluation_images / eval_cost_factor.
double corrected_cost(const CostLedger& ledger);

/// Full-scale accounting replay: derives the image counters from protocol
/// constants alone, no training involved. Counts may be fractional since they
/// come from products of averages.
struct LedgerReplaySpec {
  double images_per_epoch = 0.0;
  double epochs = 0.0;
  int m = 10;
  int k = 5;
  int eval_images_per_path = 1000;
  int batch_size = 1024;
  double eval_cost_factor = 3.33;
};

struct LedgerReplay {
  double optimization_images = 0.0;
  double evaluation_images = 0.0;
  double corrected = 0.0;
};

LedgerReplay replay_ledger(const LedgerReplaySpec& spec);

struct TrainConfig {
  int m = 10;
  int k = 5;
  long long warmup_iters = 0;
  double epsilon_target = 0.8;
  long long epsilon_ramp_iters = 0;  // 0 = auto: half of the post-warmup budget
  double alpha = 0.08;
  long long turnover_window_iters = 0;  // 0 = auto: one "epoch" of steps
  long long max_iters = 0;              // hard cap on optimizer steps
  int batch_size = 64;
  double lr0 = 0.12;
  std::size_t pool_capacity = 0;  // 0 = auto: min(1000, steps per epoch)
  int val_subset_size = 0;        // 0 = auto: max(64, 2% of val split)
  long long checkpoint_interval = 0;  // optimizer steps between snapshots; 0 = final only
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  CandidatePool pool;
  CostLedger ledger;
  std::vector<nlohmann::json> log;  // one JSON record per event
  long long iters = 0;
  long long rounds = 0;
  std::optional<double> final_pi;
  std::string stop_reason;  // "turnover" or "max_iters"
};

/// Greedy supernet training: warm-up by uniform single-path steps, then
/// rounds of epsilon-mixture sampling, loss-ranked filtering, pool update and
/// one optimizer step per kept path, with the turnover-based stopping rule.
/// `data` may be null for non-trainable backends (batches are then skipped
/// but the ledger still accounts the protocol's image counts). The hook is
/// invoked at every checkpoint_interval boundary.
TrainResult train_supernet(const SearchSpace& space, Evaluator& evaluator,
                           const Dataset* data, const TrainConfig& config,
                           const std::function<void(long long iter)>& checkpoint_hook = {});

/// Effective values of the auto-derived config fields (0 = auto above).
long long resolve_ramp_iters(const TrainConfig& config);
long long resolve_turnover_window(const TrainConfig& config, const Dataset* data);
std::size_t resolve_pool_capacity(const TrainConfig& config, const Dataset* data);
int resolve_val_subset_size(int requested, const Dataset* data);

}  // namespace gnas
