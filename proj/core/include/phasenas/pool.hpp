#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "phasenas/arch.hpp"

namespace phasenas {

struct PoolEntry {
  ArchitectureSpec arch;
  std::string key;  // canonical compact serialization
  double mu = 0.0;
  std::uint64_t order = 0;  // insertion sequence, breaks score ties
};

// Bounded, score-ordered candidate set. Ordering is (mu descending,
// insertion order ascending), so at equal scores the earlier entry ranks
// higher; eviction removes the last entry.
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t capacity);

  // Admits iff the key is new and either the pool has room or mu strictly
  // beats the current minimum; a full pool evicts its minimum on admission.
  bool insert(const ArchitectureSpec& arch, double mu);

  bool contains(std::string_view key) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

  const PoolEntry& best() const { return entries_.front(); }
  const PoolEntry& worst() const { return entries_.back(); }

  std::span<const PoolEntry> entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::uint64_t next_order_ = 0;
  std::vector<PoolEntry> entries_;  // kept sorted
};

}  // namespace phasenas
