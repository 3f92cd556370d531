#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gnas/rng.hpp"
#include "gnas/search_space.hpp"

namespace gnas {

struct PoolEntry {
  Path path;
  double loss = 0.0;           // priority
  std::uint64_t inserted_at = 0;  // pool update counter at first insertion
};

/// Path identity set at a recorded instant; input to the turnover statistic.
struct PoolSnapshot {
  std::unordered_set<Path, PathHash> paths;
};

/// Fixed-capacity set of the best-loss paths seen so far. Entries are unique
/// by path; re-encountered paths get their loss refreshed (last write wins).
/// A position-indexed max-heap keeps the evictable worst entry at the root,
/// so full-pool insertion is O(log n). Single-writer, multi-reader.
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t capacity);

  /// Insert or refresh one (path, loss). When full, a new path enters only if
  /// its loss strictly beats the current worst, which is evicted.
  void insert(const Path& path, double loss);

  /// Batch form of insert; entries are processed in order.
  void update(const std::vector<std::pair<Path, double>>& entries);

  /// Uniform draw over current entries; throws RuntimeAbort when empty.
  const Path& sample_uniform(Rng& rng) const;

  /// min(n, size) entries ascending by loss; ties broken by earlier insertion.
  std::vector<PoolEntry> top_n(std::size_t n) const;

  PoolSnapshot snapshot() const;

  /// Fraction of current entries absent from the snapshot; 0 when the path
  /// sets are equal, 1 for a fully replaced (or empty) pool.
  double turnover(const PoolSnapshot& snapshot) const;

  std::size_t size() const { return heap_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return heap_.empty(); }
  bool contains(const Path& path) const { return position_.count(path) != 0; }
  double worst_loss() const;

  /// Entries in internal heap order; restoring them in this order into a
  /// fresh pool reproduces the identical internal state.
  const std::vector<PoolEntry>& entries_heap_order() const { return heap_; }

  /// Persistence path: appends an entry with its recorded insertion stamp.
  void restore_entry(const Path& path, double loss, std::uint64_t inserted_at);

  std::uint64_t update_counter() const { return update_counter_; }
  void restore_update_counter(std::uint64_t value) { update_counter_ = value; }

 private:
  bool worse(const PoolEntry& a, const PoolEntry& b) const;
  void sift_up(std::size_t i);
  void sift_down(std::size_t i);
  void place(std::size_t i, PoolEntry entry);

  std::size_t capacity_;
  std::uint64_t update_counter_ = 0;
  std::vector<PoolEntry> heap_;  // max-heap on (loss, inserted_at)
  std::unordered_map<Path, std::size_t, PathHash> position_;
};

/// Pool persistence: JSON array of {path, loss, inserted_at} in heap order.
nlohmann::json pool_to_json(const CandidatePool& pool);
CandidatePool pool_from_json(const nlohmann::json& j, std::size_t capacity);
void save_pool_file(const CandidatePool& pool, const std::string& file);
CandidatePool load_pool_file(const std::string& file, std::size_t capacity);

}  // namespace gnas
