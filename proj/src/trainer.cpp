#include "gnas/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "gnas/supernet.hpp"

namespace gnas {

double epsilon_at(const EpsilonSchedule& schedule, long long iter) {
  if (iter < 0) throw ValidationError("iteration must be non-negative");
  if (schedule.target < 0.0 || schedule.target > 1.0)
    throw ValidationError("epsilon target must lie in [0, 1]");
  if (iter < schedule.warmup_iters) return 0.0;
  if (schedule.ramp_iters <= 0) return schedule.target;
  const double progress = static_cast<double>(iter - schedule.warmup_iters) /
                          static_cast<double>(schedule.ramp_iters);
  return schedule.target * std::min(1.0, progress);
}

bool should_stop(double pi, double alpha) {
  if (pi < 0.0 || pi > 1.0 || alpha < 0.0 || alpha > 1.0)
    throw ValidationError("pi and alpha must lie in [0, 1]");
  return pi <= alpha;
}

double corrected_cost(const CostLedger& ledger) {
  if (ledger.eval_cost_factor <= 0.0)
    throw ValidationError("eval_cost_factor must be positive");
  return static_cast<double>(ledger.optimization_images) +
         static_cast<double>(ledger.evaluation_images) / ledger.eval_cost_factor;
}

LedgerReplay replay_ledger(const LedgerReplaySpec& spec) {
  if (spec.images_per_epoch <= 0.0 || spec.epochs < 0.0 || spec.k < 1 || spec.m < spec.k ||
      spec.batch_size < 1 || spec.eval_cost_factor <= 0.0)
    throw ValidationError("invalid ledger replay constants");
  LedgerReplay replay;
  replay.optimization_images = spec.images_per_epoch * spec.epochs;
  // each round trains k paths on one batch each and evaluates m paths on the
  // validation subset, so per optimization image there are
  // (eval_images_per_path / batch_size) * (m / k) evaluation images
  replay.evaluation_images = replay.optimization_images *
                             (static_cast<double>(spec.eval_images_per_path) /
                              static_cast<double>(spec.batch_size)) *
                             (static_cast<double>(spec.m) / static_cast<double>(spec.k));
  replay.corrected = replay.optimization_images +
                     replay.evaluation_images / spec.eval_cost_factor;
  return replay;
}

void TrainConfig::validate() const {
  FilterConfig{m, k, val_subset_size}.validate();
  if (epsilon_target < 0.0 || epsilon_target > 1.0)
    throw ValidationError("epsilon_target must lie in [0, 1]");
  if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("alpha must lie in (0, 1)");
  if (warmup_iters < 0 || max_iters < 0 || epsilon_ramp_iters < 0 ||
      turnover_window_iters < 0 || checkpoint_interval < 0)
    throw ValidationError("iteration counts must be non-negative");
  if (warmup_iters > max_iters)
    throw ValidationError("warmup_iters must not exceed max_iters");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (lr0 < 0.0) throw ValidationError("lr0 must be non-negative");
}

long long resolve_ramp_iters(const TrainConfig& config) {
  if (config.epsilon_ramp_iters > 0) return config.epsilon_ramp_iters;
  return std::max<long long>(1, (config.max_iters - config.warmup_iters) / 2);
}

namespace {

long long steps_per_epoch(const TrainConfig& config, const Dataset* data) {
  if (data == nullptr || data->train_idx.empty()) return 0;
  return std::max<long long>(
      1, static_cast<long long>(data->train_idx.size()) / config.batch_size);
}

}  // namespace

long long resolve_turnover_window(const TrainConfig& config, const Dataset* data) {
  if (config.turnover_window_iters > 0) return config.turnover_window_iters;
  const long long epoch = steps_per_epoch(config, data);
  if (epoch > 0) return epoch;
  return std::max<long long>(1, config.max_iters / 10);
}

std::size_t resolve_pool_capacity(const TrainConfig& config, const Dataset* data) {
  if (config.pool_capacity > 0) return config.pool_capacity;
  const long long epoch = steps_per_epoch(config, data);
  const long long fallback = epoch > 0 ? epoch : std::max<long long>(1, config.max_iters);
  return static_cast<std::size_t>(std::min<long long>(1000, std::max<long long>(1, fallback)));
}

int resolve_val_subset_size(int requested, const Dataset* data) {
  if (requested > 0) return requested;
  if (data == nullptr || data->val_idx.empty()) return 64;
  const int two_percent = static_cast<int>(data->val_idx.size() / 50);
  return std::min(static_cast<int>(data->val_idx.size()), std::max(64, two_percent));
}

TrainResult train_supernet(const SearchSpace& space, Evaluator& evaluator,
                           const Dataset* data, const TrainConfig& config,
                           const std::function<void(long long iter)>& checkpoint_hook) {
  space.validate();
  config.validate();
  const bool uses_data = evaluator.trainable();
  if (uses_data && data == nullptr)
    throw ValidationError("trainable backend requires a dataset");
  if (data != nullptr) data->validate();

  const long long ramp_iters = resolve_ramp_iters(config);
  const long long window = resolve_turnover_window(config, data);
  const std::size_t pool_capacity = resolve_pool_capacity(config, data);
  const int val_subset_size = resolve_val_subset_size(config.val_subset_size, data);
  const EpsilonSchedule schedule{config.epsilon_target, ramp_iters, config.warmup_iters};

  Rng root(config.seed);
  Rng warmup_rng = root.substream("warmup-sample");
  Rng mixture_rng = root.substream("mixture-sample");
  Rng val_rng = root.substream("val-subset");
  Rng batch_rng = root.substream("train-batch");

  TrainResult result{CandidatePool(pool_capacity), CostLedger{}, {}, 0, 0, {}, ""};
  long long iter = 0;

  auto draw_train_batch = [&]() -> Batch {
    if (!uses_data) return Batch{};
    return draw_batch(*data, data->train_idx, config.batch_size, batch_rng);
  };
  auto draw_val_subset = [&]() -> Batch {
    if (!uses_data) return Batch{};
    return draw_batch(*data, data->val_idx, val_subset_size, val_rng);
  };

  // warm-up: uniform single-path training, pool untouched
  while (iter < config.warmup_iters && iter < config.max_iters) {
    const Path path = uniform_sample(space, warmup_rng);
    const Batch batch = draw_train_batch();
    const double lr = cosine_lr(iter, config.max_iters, config.lr0);
    const double loss = evaluator.train_on_batch(path, batch, lr);
    result.ledger.optimization_images += config.batch_size;
    ++iter;
    result.log.push_back(nlohmann::json{{"type", "warmup"},
                                        {"iter", iter},
                                        {"epsilon", 0.0},
                                        {"path", path_to_string(path)},
                                        {"train_loss", loss},
                                        {"opt_images", result.ledger.optimization_images},
                                        {"eval_images", result.ledger.evaluation_images}});
  }

  PoolSnapshot snapshot = result.pool.snapshot();
  long long next_turnover_check = iter + window;
  long long next_checkpoint =
      config.checkpoint_interval > 0 ? iter + config.checkpoint_interval : -1;

  while (iter < config.max_iters) {
    const double epsilon = epsilon_at(schedule, iter);
    const std::vector<Path> candidates =
        sample_mixture(space, result.pool, epsilon, config.m, mixture_rng);
    const Batch val_batch = draw_val_subset();
    const FilterResult filtered =
        filter_paths_full(candidates, evaluator, val_batch, config.k);
    result.ledger.evaluation_images +=
        static_cast<long long>(config.m) * val_subset_size;

    std::vector<std::pair<Path, double>> kept;
    kept.reserve(filtered.kept_indices.size());
    for (int i : filtered.kept_indices) {
      const EvaluationRecord& rec = filtered.evaluated[static_cast<std::size_t>(i)];
      kept.emplace_back(rec.path, rec.loss);
    }
    result.pool.update(kept);

    nlohmann::json cand_paths = nlohmann::json::array();
    nlohmann::json cand_losses = nlohmann::json::array();
    for (const EvaluationRecord& rec : filtered.evaluated) {
      cand_paths.push_back(path_to_string(rec.path));
      cand_losses.push_back(rec.loss);
    }
    nlohmann::json kept_paths = nlohmann::json::array();
    nlohmann::json kept_losses = nlohmann::json::array();
    for (const auto& [path, loss] : kept) {
      kept_paths.push_back(path_to_string(path));
      kept_losses.push_back(loss);
    }

    nlohmann::json train_losses = nlohmann::json::array();
    for (const auto& [path, loss] : kept) {
      if (iter >= config.max_iters) break;
      const Batch batch = draw_train_batch();
      const double lr = cosine_lr(iter, config.max_iters, config.lr0);
      train_losses.push_back(evaluator.train_on_batch(path, batch, lr));
      result.ledger.optimization_images += config.batch_size;
      ++iter;
    }
    ++result.rounds;

    nlohmann::json record{{"type", "round"},
                          {"round", result.rounds},
                          {"iter", iter},
                          {"epsilon", epsilon},
                          {"candidates", std::move(cand_paths)},
                          {"cand_losses", std::move(cand_losses)},
                          {"kept", std::move(kept_paths)},
                          {"kept_losses", std::move(kept_losses)},
                          {"train_losses", std::move(train_losses)},
                          {"pool_size", result.pool.size()},
                          {"opt_images", result.ledger.optimization_images},
                          {"eval_images", result.ledger.evaluation_images}};

    bool stop = false;
    if (iter >= next_turnover_check) {
      const double pi = result.pool.turnover(snapshot);
      result.final_pi = pi;
      stop = should_stop(pi, config.alpha);
      record["pi"] = pi;
      record["stop"] = stop;
      snapshot = result.pool.snapshot();
      next_turnover_check += window;
    }
    result.log.push_back(std::move(record));

    if (checkpoint_hook && next_checkpoint >= 0 && iter >= next_checkpoint) {
      checkpoint_hook(iter);
      next_checkpoint += config.checkpoint_interval;
    }
    if (stop) {
      result.stop_reason = "turnover";
      break;
    }
  }

  result.iters = iter;
  if (result.stop_reason.empty()) result.stop_reason = "max_iters";
  result.log.push_back(nlohmann::json{{"type", "summary"},
                                      {"iters", result.iters},
                                      {"rounds", result.rounds},
                                      {"stop_reason", result.stop_reason},
                                      {"final_pi", result.final_pi
                                                       ? nlohmann::json(*result.final_pi)
                                                       : nlohmann::json(nullptr)},
                                      {"opt_images", result.ledger.optimization_images},
                                      {"eval_images", result.ledger.evaluation_images},
                                      {"corrected_cost", corrected_cost(result.ledger)}});
  return result;
}

}  // namespace gnas
