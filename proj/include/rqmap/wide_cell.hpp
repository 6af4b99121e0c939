#pragma once

/// \file
/// A pair of adjacent 64-bit words updated together by a double-width CAS.
///
/// Each half can be loaded on its own. Writers always replace both halves
/// with one cmpxchg16b, so a reader that loads the halves separately must
/// validate what it read (the list does this with birth epochs).

#include <atomic>
#include <cstdint>

#if !defined(__GCC_HAVE_SYNC_COMPARE_AND_SWAP_16)
#error "rqmap requires a double-width CAS (build with -mcx16 on x86-64)"
#endif

namespace rqmap {

struct word_pair {
  std::uint64_t lo;
  std::uint64_t hi;

  friend bool operator==(const word_pair &, const word_pair &) = default;
};

class alignas(16) wide_cell {
 public:
  wide_cell() noexcept = default;
  wide_cell(std::uint64_t lo, std::uint64_t hi) noexcept : lo_{lo}, hi_{hi} {}

  wide_cell(const wide_cell &) = delete;
  wide_cell &operator=(const wide_cell &) = delete;

  [[nodiscard]] std::uint64_t lo() const noexcept {
    return lo_.load(std::memory_order_acquire);
  }
  [[nodiscard]] std::uint64_t hi() const noexcept {
    return hi_.load(std::memory_order_acquire);
  }

  /// Atomic snapshot of both halves. Implemented as a CAS that writes back
  /// the value it compares against, so it needs exclusive cache-line access.
  [[nodiscard]] word_pair load_pair() const noexcept {
    const auto cur = __sync_val_compare_and_swap(raw(), 0, 0);
    return unpack(cur);
  }

  bool compare_exchange(word_pair expected, word_pair desired) noexcept {
    return __sync_bool_compare_and_swap(raw(), pack(expected), pack(desired));
  }

  /// Unconditional replacement of both halves.
  void store_pair(word_pair desired) noexcept {
    auto cur = __sync_val_compare_and_swap(raw(), 0, 0);
    for (;;) {
      const auto seen = __sync_val_compare_and_swap(raw(), cur, pack(desired));
      if (seen == cur) return;
      cur = seen;
    }
  }

 private:
  __extension__ typedef unsigned __int128 u128;

  [[nodiscard]] u128 *raw() const noexcept {
    return reinterpret_cast<u128 *>(const_cast<wide_cell *>(this));
  }

  static constexpr u128 pack(word_pair p) noexcept {
    return (static_cast<u128>(p.hi) << 64) | p.lo;
  }
  static constexpr word_pair unpack(u128 v) noexcept {
    return {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(v >> 64)};
  }

  // Little-endian layout: lo_ occupies the low 8 bytes of the 16-byte word.
  std::atomic<std::uint64_t> lo_{0};
  std::atomic<std::uint64_t> hi_{0};
};

static_assert(sizeof(wide_cell) == 16);
static_assert(alignof(wide_cell) == 16);

}  // namespace rqmap
