#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "gnas/oracle.hpp"
#include "gnas/run.hpp"
#include "gnas/supernet.hpp"
#include "test_helpers.hpp"

using namespace gnas;
using gnas::testing::read_file;
using gnas::testing::TempDir;

namespace {

nlohmann::json toy_supernet_config(const std::string& out_dir, std::uint64_t seed) {
  return nlohmann::json{
      {"version", 1},
      {"seed", seed},
      {"out_dir", out_dir},
      {"backend", "supernet"},
      {"oracle_space",
       {{"num_layers", 3}, {"num_choices", 3}, {"seed", 5}, {"good_fraction", 0.5}}},
      {"dataset",
       {{"synthetic",
         {{"num_classes", 3}, {"dim", 8}, {"train", 256}, {"val", 128}, {"seed", 11}}}}},
      {"train",
       {{"m", 6},
        {"k", 3},
        {"warmup_iters", 10},
        {"max_iters", 60},
        {"batch_size", 16},
        {"val_subset_size", 32},
        {"turnover_window_iters", 30},
        {"lr0", 0.05},
        {"pool_capacity", 16}}}};
}

nlohmann::json oracle_search_config(const std::string& out_dir, std::uint64_t seed) {
  return nlohmann::json{
      {"version", 1},
      {"seed", seed},
      {"out_dir", out_dir},
      {"backend", "oracle"},
      {"oracle_space",
       {{"num_layers", 4},
        {"num_choices", 3},
        {"seed", 21},
        {"good_fraction", 0.4},
        {"noise_sigma", 0.05}}},
      {"search",
       {{"population_size", 16},
        {"generations", 10},
        {"mutation_prob_per_gene", 0.15},
        {"constraint", {{"max_flops", 2000}}}}}};
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("train writes all artifacts and exits cleanly") {
  TempDir dir("cli_train");
  nlohmann::json config = toy_supernet_config(dir.str(), 1);
  config["train"]["checkpoint_interval"] = 25;
  CHECK(cli::dispatch("train", config) == cli::kExitOk);
  for (const char* name :
       {"train_log.jsonl", "pool.json", "ledger.json", "checkpoint.bin", "metadata.json"})
    CHECK_MESSAGE(std::filesystem::exists(dir.path / name), name);
  // interval snapshots land on round boundaries next to the final checkpoint
  std::vector<std::filesystem::path> snapshots;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path))
    if (entry.path().filename().string().rfind("checkpoint_", 0) == 0)
      snapshots.push_back(entry.path());
  REQUIRE_FALSE(snapshots.empty());
  const SearchSpace space = std::get<0>(make_oracle_space(3, 3, 5, 0.5));
  CHECK_NOTHROW(load_checkpoint(snapshots.front().string(), space));
}

TEST_CASE("identical train configs produce byte-identical primary artifacts") {
  TempDir dir_a("cli_det_a"), dir_b("cli_det_b");
  CHECK(cli::dispatch("train", toy_supernet_config(dir_a.str(), 9)) == cli::kExitOk);
  CHECK(cli::dispatch("train", toy_supernet_config(dir_b.str(), 9)) == cli::kExitOk);
  for (const char* name : {"train_log.jsonl", "pool.json", "ledger.json", "checkpoint.bin"})
    CHECK_MESSAGE(read_file(dir_a.path / name) == read_file(dir_b.path / name), name);
}

TEST_CASE("ledger dry run reproduces the reference accounting") {
  TempDir dir("cli_dry");
  const nlohmann::json config{
      {"version", 1},
      {"seed", 0},
      {"out_dir", dir.str()},
      {"ledger_dry_run",
       {{"images_per_epoch", 1.23e6}, {"epochs", 46}, {"m", 10}, {"k", 5},
        {"eval_images_per_path", 1000}, {"batch_size", 1024}}}};
  REQUIRE(cli::dispatch("train", config) == cli::kExitOk);
  const nlohmann::json ledger = nlohmann::json::parse(read_file(dir.path / "ledger.json"));
  CHECK(std::abs(ledger.at("corrected_cost").get<double>() - 89.7e6) <= 0.1e6);
  CHECK(std::abs(ledger.at("evaluation_images").get<double>() - 2.40e6 * 46) <=
        0.005 * 2.40e6 * 46);
}

TEST_CASE("oracle search report stays within the true top percentile") {
  TempDir dir("cli_search");
  const nlohmann::json config = oracle_search_config(dir.str(), 3);
  REQUIRE(cli::dispatch("search", config) == cli::kExitOk);
  const nlohmann::json report = nlohmann::json::parse(read_file(dir.path / "report.json"));
  const Path best = path_from_string(report.at("best").at("path").get<std::string>());

  // exhaustively rank all constraint-satisfying paths by oracle accuracy
  auto [space, oracle] = make_oracle_space(4, 3, 21, 0.4, 0.05);
  const Constraint constraint{2000, {}};
  std::vector<std::pair<double, std::string>> ranked;  // (loss asc = acc desc)
  enumerate_paths(space, 100000, [&](const Path& p) {
    if (check_constraint(constraint, path_cost(space, p)))
      ranked.emplace_back(oracle.loss(p), path_to_string(p));
  });
  std::sort(ranked.begin(), ranked.end());
  REQUIRE_FALSE(ranked.empty());
  const std::size_t top = std::max<std::size_t>(1, ranked.size() / 100);
  bool found = false;
  for (std::size_t i = 0; i < top && !found; ++i)
    found = ranked[i].second == path_to_string(best);
  CHECK(found);

  SUBCASE("the report is reproducible") {
    TempDir dir2("cli_search2");
    nlohmann::json again = oracle_search_config(dir2.str(), 3);
    REQUIRE(cli::dispatch("search", again) == cli::kExitOk);
    CHECK(read_file(dir2.path / "report.json") == read_file(dir.path / "report.json"));
  }
}

TEST_CASE("a constraint excluding every path aborts with a runtime error") {
  TempDir dir("cli_infeasible");
  nlohmann::json config = oracle_search_config(dir.str(), 4);
  config["search"]["constraint"]["max_flops"] = -1;
  CHECK(cli::dispatch("search", config) == cli::kExitRuntimeAbort);
}

TEST_CASE("search rejects a checkpoint trained on a different space") {
  TempDir dir("cli_mismatch");
  nlohmann::json train_config = toy_supernet_config(dir.str(), 5);
  REQUIRE(cli::dispatch("train", train_config) == cli::kExitOk);

  nlohmann::json search_config = train_config;
  search_config["oracle_space"]["num_choices"] = 4;  // different space
  search_config["search"] = {{"population_size", 8},
                             {"generations", 2},
                             {"checkpoint", (dir.path / "checkpoint.bin").string()},
                             {"constraint", {{"max_flops", 100000}}}};
  CHECK(cli::dispatch("search", search_config) == cli::kExitConfigError);
}

TEST_CASE("analyze confidence-curves emits the reference grid") {
  TempDir dir("cli_conf");
  const nlohmann::json config{{"version", 1},
                              {"seed", 0},
                              {"out_dir", dir.str()},
                              {"analyze",
                               {{"mode", "confidence-curves"},
                                {"m", 10},
                                {"q_values", {0.6, 0.8}}}}};
  REQUIRE(cli::dispatch("analyze", config) == cli::kExitOk);
  std::istringstream csv(read_file(dir.path / "confidence.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "m,k,r,q,confidence");
  bool found_paper_value = false;
  while (std::getline(csv, line)) {
    int m = 0, k = 0;
    double r = 0, q = 0, value = 0;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf,%lf", &m, &k, &r, &q, &value) == 5);
    if (k == 0) CHECK(value == 1.0);
    if (k == 5 && q == 0.6) {
      CHECK(std::abs(value - 0.8338) < 5e-5);
      found_paper_value = true;
    }
  }
  CHECK(found_paper_value);
}

TEST_CASE("analyze pool-trace recovers the stopping statistic from the log") {
  TempDir dir("cli_trace");
  nlohmann::json train_config{
      {"version", 1},
      {"seed", 13},
      {"out_dir", dir.str()},
      {"backend", "oracle"},
      {"oracle_space",
       {{"num_layers", 4}, {"num_choices", 3}, {"seed", 2}, {"good_fraction", 0.3},
        {"noise_sigma", 0.1}}},
      {"train",
       {{"m", 8}, {"k", 4}, {"warmup_iters", 0}, {"max_iters", 2000},
        {"turnover_window_iters", 40}, {"pool_capacity", 12}, {"batch_size", 8},
        {"val_subset_size", 16}}}};
  REQUIRE(cli::dispatch("train", train_config) == cli::kExitOk);

  const nlohmann::json analyze_config{
      {"version", 1},
      {"seed", 13},
      {"out_dir", dir.str()},
      {"analyze",
       {{"mode", "pool-trace"}, {"train_log", (dir.path / "train_log.jsonl").string()}}}};
  REQUIRE(cli::dispatch("analyze", analyze_config) == cli::kExitOk);

  std::istringstream csv(read_file(dir.path / "pool_trace.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "iter,pi,stop");
  double last_pi = -1.0;
  int last_stop = 0;
  while (std::getline(csv, line)) {
    long long iter = 0;
    int stop = 0;
    REQUIRE(std::sscanf(line.c_str(), "%lld,%lf,%d", &iter, &last_pi, &stop) == 3);
    last_stop = stop;
  }
  REQUIRE(last_pi >= 0.0);
  if (last_stop == 1) CHECK(last_pi <= 0.08);
}

TEST_CASE("analyze correlation runs both backends and is reproducible") {
  TempDir dir("cli_corr");
  nlohmann::json config{
      {"version", 1},
      {"seed", 31},
      {"out_dir", (dir.path / "a").string()},
      {"backend", "supernet"},
      {"oracle_space",
       {{"num_layers", 4}, {"num_choices", 3}, {"seed", 6}, {"good_fraction", 0.5}}},
      {"dataset",
       {{"synthetic",
         {{"num_classes", 3}, {"dim", 8}, {"train", 128}, {"val", 256}, {"seed", 12}}}}},
      {"analyze",
       {{"mode", "correlation"},
        {"n_paths", 30},
        {"subset_sizes", {8, 32}},
        {"full_eval_size", 64}}}};
  REQUIRE(cli::dispatch("analyze", config) == cli::kExitOk);
  config["out_dir"] = (dir.path / "b").string();
  REQUIRE(cli::dispatch("analyze", config) == cli::kExitOk);
  const std::string csv = read_file(dir.path / "a" / "correlation.csv");
  CHECK(csv == read_file(dir.path / "b" / "correlation.csv"));
  CHECK(csv.rfind("subset_size,spearman_rho,kendall_tau,n_paths,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + one row per size

  // trained-checkpoint branch: reuse a train run's weights
  TempDir train_dir("cli_corr_train");
  nlohmann::json train_config = toy_supernet_config(train_dir.str(), 2);
  REQUIRE(cli::dispatch("train", train_config) == cli::kExitOk);
  config["out_dir"] = (dir.path / "trained").string();
  config["oracle_space"] = train_config["oracle_space"];
  config["dataset"] = train_config["dataset"];
  config["analyze"]["n_paths"] = 20;  // the train space has only 27 paths
  config["analyze"]["checkpoint"] = (train_dir.path / "checkpoint.bin").string();
  REQUIRE(cli::dispatch("analyze", config) == cli::kExitOk);
  CHECK(std::filesystem::exists(dir.path / "trained" / "correlation.csv"));
}

TEST_CASE("analyze rejects unknown modes") {
  TempDir dir("cli_badmode");
  const nlohmann::json config{{"version", 1},
                              {"seed", 0},
                              {"out_dir", dir.str()},
                              {"analyze", {{"mode", "nonsense"}}}};
  CHECK(cli::dispatch("analyze", config) == cli::kExitConfigError);
}

TEST_CASE("oracle-gen writes a reloadable space and oracle pair") {
  TempDir dir("cli_gen");
  const nlohmann::json config{{"version", 1},
                              {"seed", 0},
                              {"out_dir", dir.str()},
                              {"oracle_space",
                               {{"num_layers", 5},
                                {"num_choices", 3},
                                {"seed", 8},
                                {"good_fraction", 0.3},
                                {"noise_sigma", 0.1}}}};
  REQUIRE(cli::dispatch("oracle-gen", config) == cli::kExitOk);
  const SearchSpace space = load_space_file((dir.path / "space.json").string());
  const TabularOracle oracle = load_oracle_file((dir.path / "oracle.json").string());
  auto [expected_space, expected_oracle] = make_oracle_space(5, 3, 8, 0.3, 0.1);
  CHECK(space_hash(space) == space_hash(expected_space));
  CHECK(oracle.threshold == expected_oracle.threshold);
}

TEST_CASE("config loading enforces the schema basics") {
  TempDir dir("cli_cfg");
  const std::string good = (dir.path / "good.json").string();
  std::ofstream(good) << R"({"version": 1, "seed": 3})";
  CHECK_NOTHROW(cli::load_config(good));

  const std::string no_seed = (dir.path / "no_seed.json").string();
  std::ofstream(no_seed) << R"({"version": 1})";
  CHECK_THROWS_AS(cli::load_config(no_seed), ValidationError);

  const std::string bad_version = (dir.path / "bad_version.json").string();
  std::ofstream(bad_version) << R"({"version": 7, "seed": 3})";
  CHECK_THROWS_AS(cli::load_config(bad_version), ValidationError);

  CHECK_THROWS_AS(cli::load_config((dir.path / "missing.json").string()), ValidationError);

  const std::string garbage = (dir.path / "garbage.json").string();
  std::ofstream(garbage) << "{not json";
  CHECK_THROWS_AS(cli::load_config(garbage), ValidationError);
}

TEST_CASE("overrides rewrite nested keys") {
  nlohmann::json config{{"version", 1}, {"train", {{"max_iters", 10}}}};
  cli::apply_override(config, "train.max_iters=500");
  CHECK(config["train"]["max_iters"] == 500);
  cli::apply_override(config, "backend=oracle");
  CHECK(config["backend"] == "oracle");
  cli::apply_override(config, "train.lr0=0.25");
  CHECK(config["train"]["lr0"] == 0.25);
  CHECK_THROWS_AS(cli::apply_override(config, "no_equals"), ValidationError);
}

TEST_CASE("GNAS_OUT_DIR provides the output directory fallback") {
  const nlohmann::json with{{"out_dir", "/tmp/explicit"}};
  CHECK(cli::resolve_out_dir(with) == "/tmp/explicit");
  setenv("GNAS_OUT_DIR", "/tmp/from_env", 1);
  const nlohmann::json without = nlohmann::json::object();
  CHECK(cli::resolve_out_dir(without) == "/tmp/from_env");
  unsetenv("GNAS_OUT_DIR");
  CHECK_THROWS_AS(cli::resolve_out_dir(without), ValidationError);
}

TEST_CASE("unknown commands are config errors") {
  CHECK(cli::dispatch("frobnicate", nlohmann::json::object()) == cli::kExitConfigError);
}

TEST_SUITE_END();
