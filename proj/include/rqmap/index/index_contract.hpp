#pragma once

/// \file
/// Contract for a fast index that shortcuts the start of a list traversal.
///
/// The index maps keys to list nodes. It is never a correctness obligation:
/// `find_pred(k)` should return a node whose key is smaller than `k`, but the
/// list validates every candidate and falls back to the head sentinel.

#include <algorithm>
#include <concepts>
#include <cstdint>

#include "rqmap/common.hpp"
#include "rqmap/list_node.hpp"

namespace rqmap {

/// findPred probes per traversal before falling back to the head sentinel.
inline constexpr int index_max_attempts = 5;

template <typename I>
concept fast_index = requires(I &idx, key_type k, list_node *n, epoch_type birth) {
  typename I::config;
  { I::enabled } -> std::convertible_to<bool>;
  { idx.find_pred(k) } -> std::same_as<list_node *>;
  idx.insert(k, n, birth);
  idx.remove(k, n);
  idx.update(k, n, birth);
};

/// Predecessor lookup for indexes that only offer an at-or-below search:
/// probes key - 2, key - 10, then halves the distance to key_min, returning
/// the first hit whose key is strictly smaller than `key`. `search(k)` returns
/// a (key, node) pair for some indexed entry at or below k, node == nullptr
/// on a miss.
template <typename Search>
list_node *find_pred_by_decrement(key_type key, Search &&search,
                                  int attempts = index_max_attempts) {
  // Work in offsets above key_min to stay clear of signed overflow.
  const auto offset = [](key_type k) {
    return static_cast<std::uint64_t>(k) - static_cast<std::uint64_t>(key_min);
  };
  const auto from_offset = [](std::uint64_t o) {
    return static_cast<key_type>(o + static_cast<std::uint64_t>(key_min));
  };
  std::uint64_t probe = offset(key);
  for (int i = 0; i < attempts && probe > 1; ++i) {
    if (i == 0)
      probe = probe > 2 ? probe - 2 : 1;
    else if (i == 1)
      probe = probe > 8 ? probe - 8 : 1;
    else
      probe = std::max<std::uint64_t>(probe / 2, 1);
    const auto [k, n] = search(from_offset(probe));
    if (n != nullptr && k < key) return n;
  }
  return nullptr;
}

/// Always start at the head sentinel.
class no_index {
 public:
  struct config {};
  static constexpr bool enabled = false;

  no_index() noexcept = default;
  explicit no_index(config) noexcept {}

  list_node *find_pred(key_type) noexcept { return nullptr; }
  void insert(key_type, list_node *, epoch_type) noexcept {}
  void remove(key_type, list_node *) noexcept {}
  void update(key_type, list_node *, epoch_type) noexcept {}
};

static_assert(fast_index<no_index>);

}  // namespace rqmap
