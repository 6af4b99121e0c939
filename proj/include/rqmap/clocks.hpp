#pragma once

/// \file
/// The two independent monotone counters: the range-query timestamp clock and
/// the reclamation epoch clock.

#include <atomic>
#include <cstdint>

#include "rqmap/common.hpp"

namespace rqmap {

/// Logical time for range queries. Range queries advance it; updates only
/// read it when publishing a node's timestamp.
class timestamp_clock {
 public:
  timestamp_clock() noexcept = default;

  [[nodiscard]] timestamp_type get() const noexcept { return counter_.load(); }

  /// Returns the pre-increment value.
  timestamp_type fetch_add() noexcept { return counter_.fetch_add(1); }

 private:
  alignas(64) std::atomic<timestamp_type> counter_{ts_initial};
  char pad_[64 - sizeof(std::atomic<timestamp_type>)]{};
};

/// Slow-ticking reclamation clock. It only moves when a recycled batch would
/// otherwise be handed out in the same epoch it was stamped with.
class epoch_clock {
 public:
  epoch_clock() noexcept = default;

  [[nodiscard]] epoch_type get() const noexcept { return counter_.load(); }

  /// Advances from `from` to `from + 1`. Returns false if another thread
  /// already moved the clock past `from`.
  bool try_advance(epoch_type from) noexcept {
    if (counter_.compare_exchange_strong(from, from + 1)) {
      advances_.fetch_add(1, std::memory_order_relaxed);
      return true;
    }
    return false;
  }

  [[nodiscard]] std::uint64_t advance_count() const noexcept {
    return advances_.load(std::memory_order_relaxed);
  }

 private:
  alignas(64) std::atomic<epoch_type> counter_{epoch_initial};
  std::atomic<std::uint64_t> advances_{0};
};

}  // namespace rqmap
