#pragma once

/// \file
/// Type-preserving object pool with batched retirement.
///
/// Slots never return to the operating system. A retired slot goes to the
/// calling thread's retire batch; once the batch holds `batch_size` slots it
/// is stamped with the current epoch and pushed to the global stack of full
/// batches, at which point every slot in it may be handed out again. A thread
/// that pulls a batch stamped with the current epoch advances the epoch first,
/// so two lifetimes of one slot never share an epoch.
///
/// `T` must provide `void begin_lifetime(epoch_type birth) noexcept`, which
/// resets the slot's mutable words and publishes the new birth epoch.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rqmap/clocks.hpp"
#include "rqmap/common.hpp"
#include "rqmap/thread_registry.hpp"
#include "rqmap/wide_cell.hpp"

namespace rqmap {

struct pool_options {
  std::size_t slots = 1u << 16;
  /// Entries per retire batch, 1..retire_batch_capacity. Tests shrink it to
  /// force slots to recycle quickly.
  std::size_t batch_size = retire_batch_capacity;
  /// Record every birth and retirement plus a per-slot lifetime tag.
  bool shadow_log = false;
};

/// Slot count sized for a key range and thread count: prefill plus churn plus
/// the per-thread retire and allocation batches, doubled.
[[nodiscard]] constexpr std::size_t recommended_pool_slots(
    std::size_t key_range, std::size_t threads) noexcept {
  return 2 * (key_range + retire_batch_capacity * std::max<std::size_t>(threads, 1)) +
         4 * retire_batch_capacity;
}

/// Reads RQMAP_POOL_SLOTS, falling back to `fallback` when unset or invalid.
[[nodiscard]] inline std::size_t pool_slots_from_env(std::size_t fallback) {
  if (const char *s = std::getenv("RQMAP_POOL_SLOTS")) {
    char *end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (end != s && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return fallback;
}

enum class lifetime_event_kind : std::uint8_t { birth, retire };

struct lifetime_event {
  std::size_t slot;
  std::uint64_t tag;
  epoch_type epoch;
  lifetime_event_kind kind;
};

template <typename T>
class object_pool {
 public:
  struct allocation {
    T *slot;
    epoch_type birth;
    std::uint64_t tag;
  };

  explicit object_pool(pool_options options,
                       timestamp_clock *ts_clock = nullptr)
      : options_{options}, ts_clock_{ts_clock} {
    if (options_.batch_size == 0 || options_.batch_size > retire_batch_capacity)
      throw std::invalid_argument("rqmap: batch_size must be in [1, 64]");
    if (options_.slots == 0)
      throw std::invalid_argument("rqmap: pool needs at least one slot");

    slots_ = std::make_unique<T[]>(options_.slots);
    const auto full = (options_.slots + options_.batch_size - 1) / options_.batch_size;
    descriptors_ = std::make_unique<batch[]>(full + 2 * max_threads + 2);
    descriptor_count_ = full + 2 * max_threads + 2;

    std::size_t next_desc = 0;
    for (std::size_t i = 0; i < options_.slots; i += options_.batch_size) {
      auto &b = descriptors_[next_desc++];
      b.count = std::min(options_.batch_size, options_.slots - i);
      for (std::size_t j = 0; j < b.count; ++j) b.items[j] = &slots_[i + j];
      // Older than any epoch the clock can show, so first use never ticks.
      b.stamp_epoch = 0;
      b.stamp_ts = 0;
      push(full_, &b);
    }
    for (; next_desc < descriptor_count_; ++next_desc)
      push(empty_, &descriptors_[next_desc]);

    if (options_.shadow_log) {
      shadow_ = std::make_unique<shadow_slot[]>(options_.slots);
      logs_ = std::make_unique<std::vector<lifetime_event>[]>(max_threads);
    }
  }

  object_pool(const object_pool &) = delete;
  object_pool &operator=(const object_pool &) = delete;

  /// Hands out a slot whose lifetime has begun at the returned birth epoch.
  /// Throws pool_exhausted when no full batch is available.
  allocation allocate() {
    auto &cache = caches_[this_thread_index()];
    if (cache.alloc == nullptr || cache.alloc->count == 0) refill(cache);

    T *slot = cache.alloc->items[--cache.alloc->count];
    const epoch_type birth = epoch_.get();

    std::uint64_t tag = 0;
    if (options_.shadow_log) {
      // Birth first, then tag, then the caller's field writes. The sequence
      // word lets readers take a consistent (birth, tag) pair.
      auto &sh = shadow_[index_of(slot)];
      sh.seq.fetch_add(1);
      slot->begin_lifetime(birth);
      tag = next_tag_.fetch_add(1) + 1;
      sh.tag.store(tag);
      sh.seq.fetch_add(1);
      logs_[this_thread_index()].push_back(
          {index_of(slot), tag, birth, lifetime_event_kind::birth});
    } else {
      slot->begin_lifetime(birth);
    }
    allocations_.fetch_add(1, std::memory_order_relaxed);
    return {slot, birth, tag};
  }

  /// Appends `slot` to the calling thread's retire batch.
  void retire(T *slot) {
    const auto tid = this_thread_index();
    auto &cache = caches_[tid];
    if (cache.retire == nullptr) cache.retire = take_empty();

    if (options_.shadow_log)
      logs_[tid].push_back({index_of(slot), shadow_[index_of(slot)].tag.load(),
                            epoch_.get(), lifetime_event_kind::retire});

    retires_.fetch_add(1, std::memory_order_relaxed);
    auto *b = cache.retire;
    b->items[b->count++] = slot;
    if (b->count == options_.batch_size) {
      b->stamp_epoch = epoch_.get();
      b->stamp_ts = ts_clock_ != nullptr ? ts_clock_->get() : 0;
      push(full_, b);
      cache.retire = take_empty();
      cache.pending.store(0, std::memory_order_relaxed);
    } else {
      cache.pending.store(b->count, std::memory_order_relaxed);
    }
  }

  [[nodiscard]] epoch_clock &epoch() noexcept { return epoch_; }
  [[nodiscard]] const epoch_clock &epoch() const noexcept { return epoch_; }

  [[nodiscard]] const pool_options &options() const noexcept { return options_; }
  [[nodiscard]] bool shadow_enabled() const noexcept { return options_.shadow_log; }

  [[nodiscard]] std::size_t index_of(const T *slot) const noexcept {
    return static_cast<std::size_t>(slot - slots_.get());
  }
  [[nodiscard]] bool owns(const T *p) const noexcept {
    return p >= slots_.get() && p < slots_.get() + options_.slots;
  }

  /// Current lifetime tag of a slot (shadow mode only). A tag that differs
  /// from an earlier read implies the birth epoch has changed too.
  [[nodiscard]] std::uint64_t tag_of(const T *slot) const noexcept {
    return options_.shadow_log ? shadow_[index_of(slot)].tag.load() : 0;
  }

  /// Tag of the lifetime born at `birth`, or 0 if the slot has moved on to a
  /// later lifetime (shadow mode only).
  template <typename BirthOf>
  [[nodiscard]] std::uint64_t tag_for(const T *slot, epoch_type birth,
                                      BirthOf birth_of) const noexcept {
    if (!options_.shadow_log) return 0;
    const auto &sh = shadow_[index_of(slot)];
    for (;;) {
      const auto s1 = sh.seq.load();
      if (s1 % 2 != 0) {
        std::this_thread::yield();
        continue;
      }
      const auto b = birth_of(slot);
      const auto tag = sh.tag.load();
      if (sh.seq.load() != s1) continue;
      return b == birth ? tag : 0;
    }
  }

  /// Retired slots not yet returned to the global stack, summed over threads.
  [[nodiscard]] std::size_t retired_unreclaimed() const noexcept {
    std::size_t total = 0;
    for (const auto &c : caches_) total += c.pending.load(std::memory_order_relaxed);
    return total;
  }

  [[nodiscard]] std::uint64_t allocation_count() const noexcept {
    return allocations_.load(std::memory_order_relaxed);
  }
  [[nodiscard]] std::uint64_t retire_count() const noexcept {
    return retires_.load(std::memory_order_relaxed);
  }
  [[nodiscard]] std::uint64_t recycled_batch_count() const noexcept {
    return recycled_.load(std::memory_order_relaxed);
  }

  /// Merged shadow log. Only meaningful once all worker threads are joined.
  [[nodiscard]] std::vector<lifetime_event> shadow_log() const {
    std::vector<lifetime_event> out;
    if (!options_.shadow_log) return out;
    for (std::size_t i = 0; i < max_threads; ++i)
      out.insert(out.end(), logs_[i].begin(), logs_[i].end());
    return out;
  }

 private:
  struct batch {
    std::array<T *, retire_batch_capacity> items{};
    std::size_t count = 0;
    epoch_type stamp_epoch = 0;
    timestamp_type stamp_ts = 0;
    std::atomic<batch *> next{nullptr};
  };

  struct alignas(64) thread_cache {
    batch *alloc = nullptr;
    batch *retire = nullptr;
    std::atomic<std::size_t> pending{0};
  };

  // Treiber stack; the high word counts pushes and pops to rule out ABA.
  static void push(wide_cell &top, batch *b) noexcept {
    for (;;) {
      const auto count = top.hi();
      const auto head = top.lo();
      b->next.store(reinterpret_cast<batch *>(head));
      if (top.compare_exchange({head, count}, {reinterpret_cast<std::uint64_t>(b), count + 1}))
        return;
    }
  }

  static batch *pop(wide_cell &top) noexcept {
    for (;;) {
      const auto count = top.hi();
      const auto head = top.lo();
      if (head == 0) return nullptr;
      auto *b = reinterpret_cast<batch *>(head);
      auto *next = b->next.load();
      if (top.compare_exchange({head, count},
                               {reinterpret_cast<std::uint64_t>(next), count + 1}))
        return b;
    }
  }

  batch *take_empty() {
    auto *b = pop(empty_);
    if (b == nullptr) throw pool_exhausted("rqmap: out of batch descriptors");
    b->count = 0;
    return b;
  }

  void refill(thread_cache &cache) {
    if (cache.alloc != nullptr) {
      push(empty_, cache.alloc);
      cache.alloc = nullptr;
    }
    auto *b = pop(full_);
    if (b == nullptr)
      throw pool_exhausted("rqmap: object pool of " + std::to_string(options_.slots) +
                           " slots exhausted; raise the pool size");
    if (b->stamp_epoch != 0) {
      recycled_.fetch_add(1, std::memory_order_relaxed);
      const auto now = epoch_.get();
      if (b->stamp_epoch == now) epoch_.try_advance(now);
      if (ts_clock_ != nullptr && ts_clock_->get() == b->stamp_ts) ts_clock_->fetch_add();
    }
    cache.alloc = b;
  }

  pool_options options_;
  timestamp_clock *ts_clock_;
  epoch_clock epoch_;

  std::unique_ptr<T[]> slots_;
  std::unique_ptr<batch[]> descriptors_;
  std::size_t descriptor_count_ = 0;
  wide_cell full_{0, 0};
  wide_cell empty_{0, 0};
  std::array<thread_cache, max_threads> caches_{};

  struct shadow_slot {
    std::atomic<std::uint64_t> seq{0};
    std::atomic<std::uint64_t> tag{0};
  };

  std::unique_ptr<shadow_slot[]> shadow_;
  std::unique_ptr<std::vector<lifetime_event>[]> logs_;
  std::atomic<std::uint64_t> next_tag_{0};

  std::atomic<std::uint64_t> allocations_{0};
  std::atomic<std::uint64_t> retires_{0};
  std::atomic<std::uint64_t> recycled_{0};
};

}  // namespace rqmap
