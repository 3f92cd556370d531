#include "gnas/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gnas {

namespace {

/// Deterministic standard normal keyed by an arbitrary word stream.
double hashed_normal(std::uint64_t key) {
  double u1 = u64_to_unit(mix64(key));
  while (u1 <= 0.0) u1 = u64_to_unit(mix64(key += 0x9e3779b97f4a7c15ULL));
  const double u2 = u64_to_unit(mix64(key ^ 0xa5a5a5a5a5a5a5a5ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t path_key(const Path& path) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (int op : path.ops) h = hash_combine(h, static_cast<std::uint64_t>(op) + 1);
  return h;
}

constexpr std::uint64_t kEnumerationCap = 2'000'000;
constexpr std::uint64_t kSampleEstimate = 100'000;

}  // namespace

double TabularOracle::loss(const Path& path) const {
  if (path.ops.size() != quality.size())
    throw ValidationError("path length does not match oracle table");
  double total = 0.0;
  for (std::size_t l = 0; l < path.ops.size(); ++l) {
    const auto op = static_cast<std::size_t>(path.ops[l]);
    if (op >= quality[l].size())
      throw ValidationError("path index out of range for oracle table");
    total -= quality[l][op];
  }
  if (interaction_strength != 0.0) {
    for (std::size_t l = 0; l + 1 < path.ops.size(); ++l) {
      const std::uint64_t key = hash_combine(
          hash_combine(interaction_seed, (static_cast<std::uint64_t>(l) << 32) | 1u),
          (static_cast<std::uint64_t>(path.ops[l]) << 20) ^
              static_cast<std::uint64_t>(path.ops[l + 1]));
      total += interaction_strength * hashed_normal(key);
    }
  }
  if (noise_sigma != 0.0)
    total += noise_sigma * hashed_normal(hash_combine(interaction_seed, path_key(path)));
  return total;
}

double oracle_accuracy(double loss) { return 1.0 / (1.0 + std::exp(loss)); }

std::pair<SearchSpace, TabularOracle> make_oracle_space(int num_layers, int num_choices,
                                                        std::uint64_t seed,
                                                        double good_fraction,
                                                        double noise_sigma,
                                                        double interaction_strength) {
  if (num_layers < 1 || num_choices < 1)
    throw ValidationError("oracle space needs at least one layer and one choice");
  if (good_fraction <= 0.0 || good_fraction > 1.0)
    throw ValidationError("good_fraction must lie in (0, 1]");
  if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");

  Rng root(seed);
  Rng cost_rng = root.substream("oracle-costs");
  Rng quality_rng = root.substream("oracle-quality");

  constexpr int kDim = 8;
  SearchSpace space;
  for (int l = 0; l < num_layers; ++l) {
    LayerSpec layer;
    layer.input_dim = kDim;
    layer.output_dim = kDim;
    for (int c = 0; c < num_choices; ++c) {
      OperationChoice choice;
      choice.id = c;
      if (c == 0) {
        choice.kind = OpKind::identity;
        choice.flops = 0;
        choice.latency_ms = 0.05;
      } else {
        choice.kind = OpKind::affine_relu;
        choice.width_factor = 0.5 * c;
        const int hidden = std::max(1, static_cast<int>(std::lround(choice.width_factor * kDim)));
        choice.flops = 2LL * hidden * (kDim + kDim);  // madds of expand + project
        choice.latency_ms = 0.5 + 2.5 * cost_rng.uniform01();
      }
      layer.choices.push_back(choice);
    }
    space.layers.push_back(std::move(layer));
  }
  space.validate();

  TabularOracle oracle;
  oracle.interaction_seed = hash_combine(seed, fnv1a64("oracle-interactions"));
  oracle.interaction_strength = interaction_strength;
  oracle.noise_sigma = noise_sigma;
  oracle.quality.resize(static_cast<std::size_t>(num_layers));
  for (auto& layer_quality : oracle.quality) {
    layer_quality.resize(static_cast<std::size_t>(num_choices));
    for (double& q : layer_quality) q = quality_rng.normal();
  }

  // pick the threshold as the good_fraction quantile of the loss distribution
  std::vector<double> losses;
  const bool enumerable = enumerate_paths(space, kEnumerationCap, [&](const Path& p) {
    losses.push_back(oracle.loss(p));
  });
  if (!enumerable) {
    Rng sample_rng = root.substream("oracle-threshold");
    losses.reserve(kSampleEstimate);
    for (std::uint64_t i = 0; i < kSampleEstimate; ++i)
      losses.push_back(oracle.loss(uniform_sample(space, sample_rng)));
  }
  std::sort(losses.begin(), losses.end());
  const auto n = losses.size();
  const auto rank = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(good_fraction * static_cast<double>(n)), 1, static_cast<long long>(n)));
  oracle.threshold = losses[rank - 1];
  return {std::move(space), std::move(oracle)};
}

double enumerate_good_fraction(const SearchSpace& space, const TabularOracle& oracle) {
  std::uint64_t good = 0, total = 0;
  const bool ok = enumerate_paths(space, kEnumerationCap, [&](const Path& p) {
    ++total;
    if (oracle.is_good(p)) ++good;
  });
  if (!ok) throw ValidationError("space too large to enumerate the good fraction");
  return static_cast<double>(good) / static_cast<double>(total);
}

nlohmann::json oracle_to_json(const TabularOracle& oracle) {
  return nlohmann::json{{"version", 1},
                        {"quality", oracle.quality},
                        {"interaction_seed", oracle.interaction_seed},
                        {"interaction_strength", oracle.interaction_strength},
                        {"noise_sigma", oracle.noise_sigma},
                        {"threshold", oracle.threshold}};
}

TabularOracle oracle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1)
      throw ValidationError("unsupported oracle schema version");
    TabularOracle oracle;
    oracle.quality = j.at("quality").get<std::vector<std::vector<double>>>();
    oracle.interaction_seed = j.at("interaction_seed").get<std::uint64_t>();
    oracle.interaction_strength = j.at("interaction_strength").get<double>();
    oracle.noise_sigma = j.at("noise_sigma").get<double>();
    oracle.threshold = j.at("threshold").get<double>();
    return oracle;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed oracle definition: ") + e.what());
  }
}

TabularOracle load_oracle_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open oracle file: " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse oracle file " + file + ": " + e.what());
  }
  return oracle_from_json(j);
}

void save_oracle_file(const TabularOracle& oracle, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write oracle file: " + file);
  out << oracle_to_json(oracle).dump(2) << "\n";
}

}  // namespace gnas
