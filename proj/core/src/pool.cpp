#include "phasenas/pool.hpp"

#include <algorithm>
#include <stdexcept>

#include "phasenas/dsl.hpp"

namespace phasenas {

CandidatePool::CandidatePool(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("pool capacity must be at least 1");
  }
}

bool CandidatePool::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const PoolEntry& e) { return e.key == key; });
}

bool CandidatePool::insert(const ArchitectureSpec& arch, double mu) {
  std::string key = serialize_compact(arch);
  if (contains(key)) return false;
  if (entries_.size() >= capacity_ && mu <= entries_.back().mu) return false;

  PoolEntry entry{arch, std::move(key), mu, next_order_++};
  const auto pos = std::upper_bound(
      entries_.begin(), entries_.end(), entry,
      [](const PoolEntry& a, const PoolEntry& b) {
        return a.mu > b.mu || (a.mu == b.mu && a.order < b.order);
      });
  entries_.insert(pos, std::move(entry));
  if (entries_.size() > capacity_) entries_.pop_back();
  return true;
}

}  // namespace phasenas
