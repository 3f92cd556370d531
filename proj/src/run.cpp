#include "gnas/run.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "gnas/evolution.hpp"
#include "gnas/metrics.hpp"
#include "gnas/oracle.hpp"
#include "gnas/parallel.hpp"
#include "gnas/supernet.hpp"
#include "gnas/trainer.hpp"

namespace fs = std::filesystem;

namespace gnas::cli {

namespace {

template <typename T>
T require(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ValidationError("missing config key: " + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad config value for '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad config value for '" + key + "': " + e.what());
  }
}

/// Writes via a temp name plus rename, so the target is never half-written.
void write_file_atomic(const fs::path& target, const std::string& contents) {
  fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeAbort("cannot write " + tmp.string());
    out << contents;
    if (!out) throw RuntimeAbort("short write on " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_metadata(const fs::path& out_dir, const std::string& command,
                    const std::string& started, const std::string& finished) {
  // timestamps live here and only here; primary artifacts stay byte-stable
  const nlohmann::json meta{{"command", command},
                            {"started_at", started},
                            {"finished_at", finished}};
  write_file_atomic(out_dir / "metadata.json", meta.dump(2) + "\n");
}

struct ResolvedSpace {
  SearchSpace space;
  std::optional<TabularOracle> oracle;
};

ResolvedSpace resolve_space(const nlohmann::json& config) {
  ResolvedSpace resolved;
  if (config.contains("oracle_space")) {
    const nlohmann::json& spec = config.at("oracle_space");
    auto [space, oracle] = make_oracle_space(
        require<int>(spec, "num_layers"), require<int>(spec, "num_choices"),
        require<std::uint64_t>(spec, "seed"), require<double>(spec, "good_fraction"),
        get_or<double>(spec, "noise_sigma", 0.0),
        get_or<double>(spec, "interaction_strength", 0.0));
    resolved.space = std::move(space);
    resolved.oracle = std::move(oracle);
    return resolved;
  }
  if (!config.contains("space_file"))
    throw ValidationError("config needs either space_file or oracle_space");
  resolved.space = load_space_file(require<std::string>(config, "space_file"));
  if (config.contains("oracle_file"))
    resolved.oracle = load_oracle_file(require<std::string>(config, "oracle_file"));
  return resolved;
}

std::optional<Dataset> resolve_dataset(const nlohmann::json& config) {
  if (!config.contains("dataset")) return std::nullopt;
  const nlohmann::json& spec = config.at("dataset");
  if (spec.contains("synthetic")) {
    const nlohmann::json& syn = spec.at("synthetic");
    SyntheticSpec s;
    s.num_classes = get_or<int>(syn, "num_classes", s.num_classes);
    s.dim = get_or<int>(syn, "dim", s.dim);
    s.train = get_or<int>(syn, "train", s.train);
    s.val = get_or<int>(syn, "val", s.val);
    s.test = get_or<int>(syn, "test", s.test);
    s.cluster_radius = get_or<double>(syn, "cluster_radius", s.cluster_radius);
    s.noise_sigma = get_or<double>(syn, "noise_sigma", s.noise_sigma);
    s.seed = require<std::uint64_t>(syn, "seed");
    return make_gaussian_mixture(s);
  }
  if (spec.contains("csv")) {
    const nlohmann::json& csv = spec.at("csv");
    return load_csv_dataset(require<std::string>(csv, "file"),
                            require<int>(csv, "num_classes"),
                            get_or<double>(csv, "val_fraction", 0.2),
                            get_or<double>(csv, "test_fraction", 0.0),
                            require<std::uint64_t>(csv, "split_seed"));
  }
  throw ValidationError("dataset must be 'synthetic' or 'csv'");
}

TrainConfig parse_train_config(const nlohmann::json& config) {
  const nlohmann::json& t = config.contains("train") ? config.at("train") : nlohmann::json::object();
  TrainConfig tc;
  tc.m = get_or<int>(t, "m", tc.m);
  tc.k = get_or<int>(t, "k", tc.k);
  tc.warmup_iters = get_or<long long>(t, "warmup_iters", tc.warmup_iters);
  tc.epsilon_target = get_or<double>(t, "epsilon_target", tc.epsilon_target);
  tc.epsilon_ramp_iters = get_or<long long>(t, "epsilon_ramp_iters", tc.epsilon_ramp_iters);
  tc.alpha = get_or<double>(t, "alpha", tc.alpha);
  tc.turnover_window_iters =
      get_or<long long>(t, "turnover_window_iters", tc.turnover_window_iters);
  tc.max_iters = require<long long>(t, "max_iters");
  tc.batch_size = get_or<int>(t, "batch_size", tc.batch_size);
  tc.lr0 = get_or<double>(t, "lr0", tc.lr0);
  tc.pool_capacity = get_or<std::size_t>(t, "pool_capacity", tc.pool_capacity);
  tc.val_subset_size = get_or<int>(t, "val_subset_size", tc.val_subset_size);
  tc.checkpoint_interval = get_or<long long>(t, "checkpoint_interval", tc.checkpoint_interval);
  tc.seed = require<std::uint64_t>(config, "seed");
  tc.validate();
  return tc;
}

Constraint parse_constraint(const nlohmann::json& j) {
  Constraint c;
  if (j.contains("max_flops")) c.max_flops = j.at("max_flops").get<long long>();
  if (j.contains("max_latency_ms")) c.max_latency_ms = j.at("max_latency_ms").get<double>();
  return c;
}

nlohmann::json constraint_to_json(const Constraint& c) {
  nlohmann::json j = nlohmann::json::object();
  if (c.max_flops) j["max_flops"] = *c.max_flops;
  if (c.max_latency_ms) j["max_latency_ms"] = *c.max_latency_ms;
  return j;
}

void setup_threads(const nlohmann::json& config) {
  parallel::set_threads(get_or<int>(config, "threads", 1));
}

void run_ledger_dry_run(const nlohmann::json& config, const fs::path& out_dir) {
  const nlohmann::json& d = config.at("ledger_dry_run");
  LedgerReplaySpec spec;
  spec.images_per_epoch = require<double>(d, "images_per_epoch");
  spec.epochs = require<double>(d, "epochs");
  spec.m = get_or<int>(d, "m", spec.m);
  spec.k = get_or<int>(d, "k", spec.k);
  spec.eval_images_per_path = get_or<int>(d, "eval_images_per_path", spec.eval_images_per_path);
  spec.batch_size = get_or<int>(d, "batch_size", spec.batch_size);
  spec.eval_cost_factor = get_or<double>(d, "eval_cost_factor", spec.eval_cost_factor);
  const LedgerReplay replay = replay_ledger(spec);

  const nlohmann::json ledger{{"version", 1},
                              {"dry_run", true},
                              {"optimization_images", replay.optimization_images},
                              {"evaluation_images", replay.evaluation_images},
                              {"eval_cost_factor", spec.eval_cost_factor},
                              {"corrected_cost", replay.corrected}};
  write_file_atomic(out_dir / "ledger.json", ledger.dump(2) + "\n");
  std::cout << "ledger dry run: optimization_images=" << replay.optimization_images
            << " evaluation_images=" << replay.evaluation_images
            << " corrected_cost=" << replay.corrected << "\n";
}

}  // namespace

std::string resolve_out_dir(const nlohmann::json& config) {
  if (config.contains("out_dir")) return require<std::string>(config, "out_dir");
  if (const char* env = std::getenv("GNAS_OUT_DIR")) return env;
  throw ValidationError("no output directory: set out_dir in the config or GNAS_OUT_DIR");
}

nlohmann::json load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config file: " + file);
  nlohmann::json config;
  try {
    in >> config;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse config " + file + ": " + e.what());
  }
  if (get_or<int>(config, "version", 0) != 1)
    throw ValidationError("config must declare schema \"version\": 1");
  if (!config.contains("seed"))
    throw ValidationError("config must set an explicit seed");
  return config;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override must look like key.path=value: " + assignment);
  std::string pointer = "/" + assignment.substr(0, eq);
  for (auto& c : pointer)
    if (c == '.') c = '/';
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // unquoted strings pass through as-is
  }
  config[nlohmann::json::json_pointer(pointer)] = value;
}

void run_train(const nlohmann::json& config) {
  setup_threads(config);
  const fs::path out_dir = resolve_out_dir(config);
  const std::string started = timestamp_utc();

  if (config.contains("ledger_dry_run")) {
    run_ledger_dry_run(config, out_dir);
    write_metadata(out_dir, "train", started, timestamp_utc());
    return;
  }

  const ResolvedSpace resolved = resolve_space(config);
  const std::optional<Dataset> dataset = resolve_dataset(config);
  const std::string backend = get_or<std::string>(config, "backend", "supernet");
  const std::uint64_t seed = require<std::uint64_t>(config, "seed");
  const TrainConfig train_config = parse_train_config(config);

  std::unique_ptr<Evaluator> evaluator;
  SupernetEvaluator* supernet_backend = nullptr;
  if (backend == "supernet") {
    if (!dataset) throw ValidationError("supernet backend requires a dataset");
    Rng init_rng(seed);
    auto backend_ptr = std::make_unique<SupernetEvaluator>(
        resolved.space,
        init_supernet(resolved.space, dataset->num_classes, init_rng));
    supernet_backend = backend_ptr.get();
    evaluator = std::move(backend_ptr);
  } else if (backend == "oracle") {
    if (!resolved.oracle)
      throw ValidationError("oracle backend requires oracle_space or oracle_file");
    evaluator = std::make_unique<OracleEvaluator>(resolved.space, *resolved.oracle);
  } else {
    throw ValidationError("unknown backend: " + backend);
  }

  auto save_weights = [&](const fs::path& target) {
    fs::create_directories(out_dir);
    const fs::path tmp = target.string() + ".tmp";
    save_checkpoint(tmp.string(), resolved.space, supernet_backend->weights());
    fs::rename(tmp, target);
  };
  std::function<void(long long)> checkpoint_hook;
  if (supernet_backend != nullptr && train_config.checkpoint_interval > 0) {
    checkpoint_hook = [&](long long iter) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%08lld.bin", iter);
      save_weights(out_dir / name);
    };
  }

  TrainResult result{CandidatePool(1), CostLedger{}, {}, 0, 0, {}, ""};
  try {
    result = train_supernet(resolved.space, *evaluator, dataset ? &*dataset : nullptr,
                            train_config, checkpoint_hook);
  } catch (const RuntimeAbort&) {
    // retain a partial checkpoint next to the diagnostics
    if (supernet_backend != nullptr) save_weights(out_dir / "checkpoint.bin");
    throw;
  }

  std::string log_text;
  for (const nlohmann::json& record : result.log) log_text += record.dump() + "\n";
  write_file_atomic(out_dir / "train_log.jsonl", log_text);
  write_file_atomic(out_dir / "pool.json", pool_to_json(result.pool).dump(2) + "\n");
  const nlohmann::json ledger{{"version", 1},
                              {"optimization_images", result.ledger.optimization_images},
                              {"evaluation_images", result.ledger.evaluation_images},
                              {"eval_cost_factor", result.ledger.eval_cost_factor},
                              {"corrected_cost", corrected_cost(result.ledger)}};
  write_file_atomic(out_dir / "ledger.json", ledger.dump(2) + "\n");
  if (supernet_backend != nullptr) save_weights(out_dir / "checkpoint.bin");
  write_metadata(out_dir, "train", started, timestamp_utc());

  std::cout << "train: iters=" << result.iters << " rounds=" << result.rounds
            << " stop=" << result.stop_reason << " final_pi="
            << (result.final_pi ? std::to_string(*result.final_pi) : std::string("n/a"))
            << " corrected_cost=" << corrected_cost(result.ledger) << "\n";
}

void run_search(const nlohmann::json& config) {
  setup_threads(config);
  const fs::path out_dir = resolve_out_dir(config);
  const std::string started = timestamp_utc();

  const ResolvedSpace resolved = resolve_space(config);
  const std::optional<Dataset> dataset = resolve_dataset(config);
  const std::string backend = get_or<std::string>(config, "backend", "supernet");
  const nlohmann::json& search =
      config.contains("search") ? config.at("search") : nlohmann::json::object();

  std::unique_ptr<Evaluator> evaluator;
  Batch val_batch;
  if (backend == "supernet") {
    if (!dataset) throw ValidationError("supernet backend requires a dataset");
    const std::string checkpoint = require<std::string>(search, "checkpoint");
    evaluator = std::make_unique<SupernetEvaluator>(
        resolved.space, load_checkpoint(checkpoint, resolved.space));
    val_batch = dataset->gather(dataset->val_idx);
  } else if (backend == "oracle") {
    if (!resolved.oracle)
      throw ValidationError("oracle backend requires oracle_space or oracle_file");
    evaluator = std::make_unique<OracleEvaluator>(resolved.space, *resolved.oracle);
  } else {
    throw ValidationError("unknown backend: " + backend);
  }

  std::optional<CandidatePool> pool;
  if (search.contains("pool")) {
    const std::size_t capacity = get_or<std::size_t>(search, "pool_capacity", 1000);
    pool = load_pool_file(require<std::string>(search, "pool"), capacity);
  }

  EvolutionConfig evo;
  evo.population_size = get_or<int>(search, "population_size", evo.population_size);
  evo.generations = get_or<int>(search, "generations", evo.generations);
  evo.mutation_prob_per_gene =
      get_or<double>(search, "mutation_prob_per_gene", evo.mutation_prob_per_gene);
  evo.crossover_prob = get_or<double>(search, "crossover_prob", evo.crossover_prob);
  if (!search.contains("constraint"))
    throw ValidationError("search config needs a constraint with at least one bound");
  evo.constraint = parse_constraint(search.at("constraint"));
  evo.seed = require<std::uint64_t>(config, "seed");
  evo.offspring_attempt_budget =
      get_or<int>(search, "offspring_attempt_budget", evo.offspring_attempt_budget);
  evo.validate();

  const EvolveResult result =
      evolve(resolved.space, *evaluator, pool ? &*pool : nullptr, evo, val_batch);

  nlohmann::json generations = nlohmann::json::array();
  for (const GenerationSummary& g : result.generations)
    generations.push_back(nlohmann::json{{"generation", g.generation},
                                         {"front_sizes", g.front_sizes},
                                         {"boundary_front_size", g.boundary_front_size},
                                         {"front0_objectives", g.front0_objectives}});
  nlohmann::json eval_set = nlohmann::json::array();
  for (const EvaluationSetEntry& e : result.evaluation_set)
    eval_set.push_back(nlohmann::json{{"path", path_to_string(e.path)},
                                      {"accuracy", e.accuracy},
                                      {"loss", e.loss}});
  const nlohmann::json report{
      {"version", 1},
      {"constraint", constraint_to_json(evo.constraint)},
      {"config",
       nlohmann::json{{"population_size", evo.population_size},
                      {"generations", evo.generations},
                      {"mutation_prob_per_gene", evo.mutation_prob_per_gene},
                      {"crossover_prob", evo.crossover_prob},
                      {"seed", evo.seed},
                      {"backend", backend}}},
      {"pool_initialized", pool.has_value()},
      {"generation_summaries", std::move(generations)},
      {"evaluation_set", std::move(eval_set)},
      {"best",
       nlohmann::json{{"path", path_to_string(result.best)},
                      {"accuracy", result.best_accuracy},
                      {"flops", result.best_cost.flops},
                      {"latency_ms", result.best_cost.latency_ms}}}};
  write_file_atomic(out_dir / "report.json", report.dump(2) + "\n");
  write_metadata(out_dir, "search", started, timestamp_utc());

  std::cout << "search: best=" << path_to_string(result.best)
            << " accuracy=" << result.best_accuracy << " flops=" << result.best_cost.flops
            << " latency_ms=" << result.best_cost.latency_ms << "\n";
}

void run_analyze(const nlohmann::json& config) {
  setup_threads(config);
  const fs::path out_dir = resolve_out_dir(config);
  const std::string started = timestamp_utc();
  const nlohmann::json& analyze =
      config.contains("analyze") ? config.at("analyze") : nlohmann::json::object();
  const std::string mode = require<std::string>(analyze, "mode");

  if (mode == "confidence-curves") {
    const int m = get_or<int>(analyze, "m", 10);
    const std::vector<double> q_values =
        get_or<std::vector<double>>(analyze, "q_values", {0.2, 0.4, 0.6, 0.8});
    std::ostringstream csv;
    csv << "m,k,r,q,confidence\n";
    for (double q : q_values)
      for (int k = 0; k <= m; ++k)
        csv << m << "," << k << "," << static_cast<double>(k) / m << "," << q << ","
            << confidence(m, k, q) << "\n";
    write_file_atomic(out_dir / "confidence.csv", csv.str());
  } else if (mode == "correlation") {
    const ResolvedSpace resolved = resolve_space(config);
    const std::optional<Dataset> dataset = resolve_dataset(config);
    const std::string backend = get_or<std::string>(config, "backend", "supernet");
    std::unique_ptr<Evaluator> evaluator;
    if (backend == "supernet") {
      if (!dataset) throw ValidationError("supernet backend requires a dataset");
      if (analyze.contains("checkpoint")) {
        evaluator = std::make_unique<SupernetEvaluator>(
            resolved.space,
            load_checkpoint(require<std::string>(analyze, "checkpoint"), resolved.space));
      } else {
        // random-weight supernet; the untrained-ranking baseline
        Rng init_rng(require<std::uint64_t>(config, "seed"));
        evaluator = std::make_unique<SupernetEvaluator>(
            resolved.space,
            init_supernet(resolved.space, dataset->num_classes, init_rng));
      }
    } else if (backend == "oracle") {
      if (!resolved.oracle)
        throw ValidationError("oracle backend requires oracle_space or oracle_file");
      evaluator = std::make_unique<OracleEvaluator>(resolved.space, *resolved.oracle);
    } else {
      throw ValidationError("unknown backend: " + backend);
    }

    CorrelationExperimentConfig exp;
    exp.n_paths = get_or<int>(analyze, "n_paths", 1000);
    exp.subset_sizes = require<std::vector<int>>(analyze, "subset_sizes");
    exp.full_eval_size = get_or<int>(analyze, "full_eval_size", 0);
    exp.subset_stat = get_or<std::string>(analyze, "subset_stat", "loss") == "accuracy"
                          ? RankStat::accuracy
                          : RankStat::loss;
    const std::uint64_t seed = require<std::uint64_t>(config, "seed");
    Rng rng(seed);
    const std::vector<CorrelationRow> rows = correlation_experiment(
        *evaluator, resolved.space, dataset ? &*dataset : nullptr, exp, rng);
    std::ostringstream csv;
    csv << "subset_size,spearman_rho,kendall_tau,n_paths,seed\n";
    for (const CorrelationRow& row : rows)
      csv << row.subset_size << "," << row.spearman << "," << row.kendall << ","
          << exp.n_paths << "," << seed << "\n";
    write_file_atomic(out_dir / "correlation.csv", csv.str());
  } else if (mode == "pool-trace") {
    const std::string log_file = require<std::string>(analyze, "train_log");
    std::ifstream in(log_file);
    if (!in) throw ValidationError("cannot open training log: " + log_file);
    std::ostringstream csv;
    csv << "iter,pi,stop\n";
    std::string line;
    std::optional<double> final_pi;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bad training log line: " + std::string(e.what()));
      }
      if (record.value("type", "") != "round" || !record.contains("pi")) continue;
      const double pi = record.at("pi").get<double>();
      final_pi = pi;
      csv << record.at("iter").get<long long>() << "," << pi << ","
          << (record.at("stop").get<bool>() ? 1 : 0) << "\n";
    }
    write_file_atomic(out_dir / "pool_trace.csv", csv.str());
    std::cout << "pool-trace: final_pi="
              << (final_pi ? std::to_string(*final_pi) : std::string("n/a")) << "\n";
  } else {
    throw ValidationError("unknown analyze mode: " + mode);
  }
  write_metadata(out_dir, "analyze", started, timestamp_utc());
}

void run_oracle_gen(const nlohmann::json& config) {
  const fs::path out_dir = resolve_out_dir(config);
  const std::string started = timestamp_utc();
  if (!config.contains("oracle_space"))
    throw ValidationError("oracle-gen needs an oracle_space section");
  const ResolvedSpace resolved = resolve_space(config);
  write_file_atomic(out_dir / "space.json", space_to_json(resolved.space).dump(2) + "\n");
  write_file_atomic(out_dir / "oracle.json", oracle_to_json(*resolved.oracle).dump(2) + "\n");
  write_metadata(out_dir, "oracle-gen", started, timestamp_utc());
  std::cout << "oracle-gen: wrote space.json and oracle.json (|A| = "
            << space_size(resolved.space).to_string() << ")\n";
}

int dispatch(const std::string& command, const nlohmann::json& config) {
  try {
    if (command == "train")
      run_train(config);
    else if (command == "search")
      run_search(config);
    else if (command == "analyze")
      run_analyze(config);
    else if (command == "oracle-gen")
      run_oracle_gen(config);
    else
      throw ValidationError("unknown command: " + command);
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return kExitRuntimeAbort;
  }
}

}  // namespace gnas::cli
