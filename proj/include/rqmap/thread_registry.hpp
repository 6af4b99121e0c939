#pragma once

/// \file
/// Dense per-thread indices used to address per-thread caches.
///
/// A thread claims the lowest free index on first use and releases it when it
/// exits, so short-lived test threads do not exhaust the table.

#include <array>
#include <atomic>
#include <cstddef>
#include <stdexcept>

namespace rqmap {

inline constexpr std::size_t max_threads = 256;

namespace detail {

class thread_slots {
 public:
  static thread_slots &instance() noexcept {
    static thread_slots slots;
    return slots;
  }

  std::size_t acquire() {
    for (;;) {
      for (std::size_t i = 0; i < max_threads; ++i) {
        bool expected = false;
        if (!used_[i].load(std::memory_order_relaxed) &&
            used_[i].compare_exchange_strong(expected, true))
          return i;
      }
      throw std::runtime_error("rqmap: more than max_threads live threads");
    }
  }

  void release(std::size_t i) noexcept { used_[i].store(false); }

 private:
  std::array<std::atomic<bool>, max_threads> used_{};
};

struct thread_slot_holder {
  std::size_t index;
  thread_slot_holder() : index{thread_slots::instance().acquire()} {}
  ~thread_slot_holder() { thread_slots::instance().release(index); }
  thread_slot_holder(const thread_slot_holder &) = delete;
  thread_slot_holder &operator=(const thread_slot_holder &) = delete;
};

}  // namespace detail

/// Index of the calling thread in [0, max_threads).
[[nodiscard]] inline std::size_t this_thread_index() {
  thread_local detail::thread_slot_holder holder;
  return holder.index;
}

}  // namespace rqmap
