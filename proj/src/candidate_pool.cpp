#include "gnas/candidate_pool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace gnas {

CandidatePool::CandidatePool(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("pool capacity must be positive");
  heap_.reserve(capacity);
}

bool CandidatePool::worse(const PoolEntry& a, const PoolEntry& b) const {
  // strict "a is worse than b"; among equal losses the newer entry is worse,
  // which makes eviction independent of heap internals
  if (a.loss != b.loss) return a.loss > b.loss;
  return a.inserted_at > b.inserted_at;
}

void CandidatePool::place(std::size_t i, PoolEntry entry) {
  position_[entry.path] = i;
  heap_[i] = std::move(entry);
}

void CandidatePool::sift_up(std::size_t i) {
  while (i > 0) {
    const std::size_t parent = (i - 1) / 2;
    if (!worse(heap_[i], heap_[parent])) break;
    PoolEntry tmp = std::move(heap_[i]);
    place(i, std::move(heap_[parent]));
    place(parent, std::move(tmp));
    i = parent;
  }
}

void CandidatePool::sift_down(std::size_t i) {
  const std::size_t n = heap_.size();
  while (true) {
    std::size_t worst = i;
    const std::size_t left = 2 * i + 1;
    const std::size_t right = 2 * i + 2;
    if (left < n && worse(heap_[left], heap_[worst])) worst = left;
    if (right < n && worse(heap_[right], heap_[worst])) worst = right;
    if (worst == i) break;
    PoolEntry tmp = std::move(heap_[i]);
    place(i, std::move(heap_[worst]));
    place(worst, std::move(tmp));
    i = worst;
  }
}

void CandidatePool::insert(const Path& path, double loss) {
  if (!std::isfinite(loss)) throw ValidationError("pool loss must be finite");
  const auto it = position_.find(path);
  if (it != position_.end()) {
    heap_[it->second].loss = loss;  // refresh; keeps the original inserted_at
    sift_up(it->second);
    sift_down(position_.at(path));  // position may have changed during sift_up
    ++update_counter_;
    return;
  }
  PoolEntry entry{path, loss, update_counter_++};
  if (heap_.size() < capacity_) {
    heap_.push_back(std::move(entry));
    position_[path] = heap_.size() - 1;
    sift_up(heap_.size() - 1);
    return;
  }
  if (loss >= heap_.front().loss) return;  // must strictly beat the worst
  position_.erase(heap_.front().path);
  place(0, std::move(entry));
  sift_down(0);
}

void CandidatePool::update(const std::vector<std::pair<Path, double>>& entries) {
  for (const auto& [path, loss] : entries) insert(path, loss);
}

void CandidatePool::restore_entry(const Path& path, double loss, std::uint64_t inserted_at) {
  if (!std::isfinite(loss)) throw ValidationError("pool loss must be finite");
  if (position_.count(path) != 0) throw ValidationError("duplicate path in pool file");
  if (heap_.size() >= capacity_) throw ValidationError("pool file exceeds capacity");
  heap_.push_back(PoolEntry{path, loss, inserted_at});
  position_[path] = heap_.size() - 1;
  sift_up(heap_.size() - 1);
}

const Path& CandidatePool::sample_uniform(Rng& rng) const {
  if (heap_.empty()) throw RuntimeAbort("cannot sample from an empty candidate pool");
  return heap_[rng.uniform_index(heap_.size())].path;
}

std::vector<PoolEntry> CandidatePool::top_n(std::size_t n) const {
  if (n == 0) throw ValidationError("top_n requires n >= 1");
  std::vector<PoolEntry> sorted = heap_;
  std::sort(sorted.begin(), sorted.end(), [](const PoolEntry& a, const PoolEntry& b) {
    if (a.loss != b.loss) return a.loss < b.loss;
    return a.inserted_at < b.inserted_at;
  });
  if (sorted.size() > n) sorted.resize(n);
  return sorted;
}

PoolSnapshot CandidatePool::snapshot() const {
  PoolSnapshot snap;
  snap.paths.reserve(heap_.size());
  for (const PoolEntry& entry : heap_) snap.paths.insert(entry.path);
  return snap;
}

double CandidatePool::turnover(const PoolSnapshot& snapshot) const {
  if (heap_.empty()) return 1.0;
  std::size_t retained = 0;
  for (const PoolEntry& entry : heap_)
    if (snapshot.paths.count(entry.path) != 0) ++retained;
  return 1.0 - static_cast<double>(retained) / static_cast<double>(heap_.size());
}

double CandidatePool::worst_loss() const {
  if (heap_.empty()) throw RuntimeAbort("empty pool has no worst entry");
  return heap_.front().loss;
}

nlohmann::json pool_to_json(const CandidatePool& pool) {
  nlohmann::json entries = nlohmann::json::array();
  for (const PoolEntry& entry : pool.entries_heap_order())
    entries.push_back(nlohmann::json{{"path", path_to_string(entry.path)},
                                     {"loss", entry.loss},
                                     {"inserted_at", entry.inserted_at}});
  return nlohmann::json{{"version", 1},
                        {"update_counter", pool.update_counter()},
                        {"entries", std::move(entries)}};
}

CandidatePool pool_from_json(const nlohmann::json& j, std::size_t capacity) {
  try {
    if (j.at("version").get<int>() != 1)
      throw ValidationError("unsupported pool schema version");
    CandidatePool pool(capacity);
    // entries are stored in heap order, so ordered restore reproduces the
    // identical heap array
    for (const nlohmann::json& je : j.at("entries"))
      pool.restore_entry(path_from_string(je.at("path").get<std::string>()),
                         je.at("loss").get<double>(),
                         je.at("inserted_at").get<std::uint64_t>());
    pool.restore_update_counter(j.at("update_counter").get<std::uint64_t>());
    return pool;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pool file: ") + e.what());
  }
}

void save_pool_file(const CandidatePool& pool, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write pool file: " + file);
  out << pool_to_json(pool).dump(2) << "\n";
}

CandidatePool load_pool_file(const std::string& file, std::size_t capacity) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open pool file: " + file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse pool file " + file + ": " + e.what());
  }
  return pool_from_json(j, capacity);
}

}  // namespace gnas
