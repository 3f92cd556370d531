#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gnas/biguint.hpp"
#include "gnas/rng.hpp"
#include "gnas/util.hpp"

namespace gnas {

enum class OpKind { identity, affine_relu };

std::string_view to_string(OpKind kind);
OpKind op_kind_from_string(std::string_view name);

/// One selectable block at one layer. Costs are static attributes: flops is an
/// analytic count, latency comes from a user-supplied lookup table.
struct OperationChoice {
  int id = 0;
  OpKind kind = OpKind::affine_relu;
  double width_factor = 1.0;  // hidden-capacity multiplier; unused for identity
  long long flops = 0;
  double latency_ms = 0.0;
};

struct LayerSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<OperationChoice> choices;
};

/// The discrete architecture space: a chain of layers, each with its own
/// choice list. Immutable after construction; validate() checks all structural
/// invariants and throws ValidationError on the first violation.
struct SearchSpace {
  std::vector<LayerSpec> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
  int num_choices(int layer) const {
    return static_cast<int>(layers[static_cast<std::size_t>(layer)].choices.size());
  }
  int input_dim() const { return layers.front().input_dim; }
  int output_dim() const { return layers.back().output_dim; }

  void validate() const;
};

/// One architecture: a choice index per layer.
struct Path {
  std::vector<int> ops;

  bool operator==(const Path&) const = default;
};

struct PathHash {
  std::size_t operator()(const Path& p) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int op : p.ops) h = hash_combine(h, static_cast<std::uint64_t>(op) + 1);
    return static_cast<std::size_t>(h);
  }
};

/// Hardware budget; at least one bound must be set when used by a searcher.
struct Constraint {
  std::optional<long long> max_flops;
  std::optional<double> max_latency_ms;

  bool any() const { return max_flops.has_value() || max_latency_ms.has_value(); }
};

struct CostSummary {
  long long flops = 0;
  double latency_ms = 0.0;
};

void validate_path(const SearchSpace& space, const Path& path);

/// Independent uniform draw per layer; deterministic given the rng state.
Path uniform_sample(const SearchSpace& space, Rng& rng);

/// Exact |A| = product of per-layer choice counts.
BigUint space_size(const SearchSpace& space);

/// Sum of the selected blocks' costs. Throws ValidationError on a bad index.
CostSummary path_cost(const SearchSpace& space, const Path& path);

/// True iff every set bound holds, inclusively.
bool check_constraint(const Constraint& constraint, const CostSummary& cost);

/// "0,3,1" round-trip serialization.
std::string path_to_string(const Path& path);
Path path_from_string(std::string_view text);

/// Stable 64-bit digest of the space definition; stored in checkpoints so a
/// reload against a different space is rejected.
std::uint64_t space_hash(const SearchSpace& space);

nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace space_from_json(const nlohmann::json& j);
SearchSpace load_space_file(const std::string& file);
void save_space_file(const SearchSpace& space, const std::string& file);

/// Visits every path when |A| <= max_count and returns true; returns false
/// without visiting anything when the space is too large.
bool enumerate_paths(const SearchSpace& space, std::uint64_t max_count,
                     const std::function<void(const Path&)>& visit);

}  // namespace gnas
