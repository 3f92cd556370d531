#include "gnas/search_space.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gnas {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::identity: return "identity";
    case OpKind::affine_relu: return "affine_relu";
  }
  return "unknown";
}

OpKind op_kind_from_string(std::string_view name) {
  if (name == "identity") return OpKind::identity;
  if (name == "affine_relu") return OpKind::affine_relu;
  throw ValidationError("unknown operation kind: " + std::string(name));
}

void SearchSpace::validate() const {
  if (layers.empty()) throw ValidationError("search space must have at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& layer = layers[l];
    const std::string where = "layer " + std::to_string(l);
    if (layer.input_dim <= 0 || layer.output_dim <= 0)
      throw ValidationError(where + ": dimensions must be positive");
    if (l + 1 < layers.size() && layer.output_dim != layers[l + 1].input_dim)
      throw ValidationError(where + ": output dim " + std::to_string(layer.output_dim) +
                            " does not feed layer " + std::to_string(l + 1));
    if (layer.choices.empty()) throw ValidationError(where + ": needs at least one choice");
    std::set<int> ids;
    for (const OperationChoice& choice : layer.choices) {
      if (!ids.insert(choice.id).second)
        throw ValidationError(where + ": duplicate choice id " + std::to_string(choice.id));
      if (choice.flops < 0 || choice.latency_ms < 0.0)
        throw ValidationError(where + ": costs must be non-negative");
      if (choice.kind == OpKind::identity) {
        if (layer.input_dim != layer.output_dim)
          throw ValidationError(where + ": identity requires matching dimensions");
        if (choice.flops != 0)
          throw ValidationError(where + ": identity must have zero flops");
      } else if (choice.width_factor <= 0.0) {
        throw ValidationError(where + ": width_factor must be positive");
      }
    }
  }
}

void validate_path(const SearchSpace& space, const Path& path) {
  if (static_cast<int>(path.ops.size()) != space.num_layers())
    throw ValidationError("path length " + std::to_string(path.ops.size()) +
                          " does not match space with " +
                          std::to_string(space.num_layers()) + " layers");
  for (std::size_t l = 0; l < path.ops.size(); ++l) {
    const int op = path.ops[l];
    if (op < 0 || op >= space.num_choices(static_cast<int>(l)))
      throw ValidationError("path index " + std::to_string(op) +
                            " out of range at layer " + std::to_string(l));
  }
}

Path uniform_sample(const SearchSpace& space, Rng& rng) {
  Path path;
  path.ops.reserve(space.layers.size());
  for (const LayerSpec& layer : space.layers)
    path.ops.push_back(static_cast<int>(rng.uniform_index(layer.choices.size())));
  return path;
}

BigUint space_size(const SearchSpace& space) {
  BigUint size(1);
  for (const LayerSpec& layer : space.layers)
    size.mul_u32(static_cast<std::uint32_t>(layer.choices.size()));
  return size;
}

CostSummary path_cost(const SearchSpace& space, const Path& path) {
  validate_path(space, path);
  CostSummary cost;
  for (std::size_t l = 0; l < path.ops.size(); ++l) {
    const OperationChoice& choice =
        space.layers[l].choices[static_cast<std::size_t>(path.ops[l])];
    cost.flops += choice.flops;
    cost.latency_ms += choice.latency_ms;
  }
  return cost;
}

bool check_constraint(const Constraint& constraint, const CostSummary& cost) {
  if (!constraint.any())
    throw ValidationError("constraint must set at least one bound");
  if (constraint.max_flops && cost.flops > *constraint.max_flops) return false;
  if (constraint.max_latency_ms && cost.latency_ms > *constraint.max_latency_ms) return false;
  return true;
}

std::string path_to_string(const Path& path) {
  std::string out;
  for (std::size_t i = 0; i < path.ops.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(path.ops[i]);
  }
  return out;
}

Path path_from_string(std::string_view text) {
  if (text.empty()) throw ValidationError("empty path string");
  Path path;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string_view token = text.substr(pos, comma - pos);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || value < 0)
      throw ValidationError("bad path token '" + std::string(token) + "'");
    path.ops.push_back(value);
    pos = comma + 1;
  }
  return path;
}

std::uint64_t space_hash(const SearchSpace& space) {
  return fnv1a64(space_to_json(space).dump());
}

nlohmann::json space_to_json(const SearchSpace& space) {
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& layer : space.layers) {
    nlohmann::json choices = nlohmann::json::array();
    for (const OperationChoice& choice : layer.choices) {
      nlohmann::json c{{"id", choice.id},
                       {"kind", std::string(to_string(choice.kind))},
                       {"flops", choice.flops},
                       {"latency_ms", choice.latency_ms}};
      if (choice.kind == OpKind::affine_relu) c["width_factor"] = choice.width_factor;
      choices.push_back(std::move(c));
    }
    layers.push_back(nlohmann::json{{"input_dim", layer.input_dim},
                                    {"output_dim", layer.output_dim},
                                    {"choices", std::move(choices)}});
  }
  return nlohmann::json{{"version", 1}, {"layers", std::move(layers)}};
}

SearchSpace space_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1)
      throw ValidationError("unsupported space schema version");
    SearchSpace space;
    for (const nlohmann::json& jl : j.at("layers")) {
      LayerSpec layer;
      layer.input_dim = jl.at("input_dim").get<int>();
      layer.output_dim = jl.at("output_dim").get<int>();
      for (const nlohmann::json& jc : jl.at("choices")) {
        OperationChoice choice;
        choice.id = jc.at("id").get<int>();
        choice.kind = op_kind_from_string(jc.at("kind").get<std::string>());
        choice.flops = jc.at("flops").get<long long>();
        choice.latency_ms = jc.at("latency_ms").get<double>();
        if (choice.kind == OpKind::affine_relu)
          choice.width_factor = jc.at("width_factor").get<double>();
        layer.choices.push_back(choice);
      }
      space.layers.push_back(std::move(layer));
    }
    space.validate();
    return space;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed space definition: ") + e.what());
  }
}

SearchSpace load_space_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open space file: " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse space file " + file + ": " + e.what());
  }
  return space_from_json(j);
}

void save_space_file(const SearchSpace& space, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write space file: " + file);
  out << space_to_json(space).dump(2) << "\n";
}

bool enumerate_paths(const SearchSpace& space, std::uint64_t max_count,
                     const std::function<void(const Path&)>& visit) {
  if (space_size(space).to_u64_saturating() > max_count) return false;
  Path path;
  path.ops.assign(space.layers.size(), 0);
  while (true) {
    visit(path);
    // odometer increment over per-layer choice counts
    std::size_t l = 0;
    for (; l < path.ops.size(); ++l) {
      if (++path.ops[l] < space.num_choices(static_cast<int>(l))) break;
      path.ops[l] = 0;
    }
    if (l == path.ops.size()) return true;
  }
}

}  // namespace gnas
