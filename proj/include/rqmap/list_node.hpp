#pragma once

/// \file
/// Layout of a versioned list node.

#include <algorithm>
#include <atomic>

#include "rqmap/common.hpp"
#include "rqmap/tagged_link.hpp"
#include "rqmap/wide_cell.hpp"

namespace rqmap {

/// One key/value pair plus its version metadata.
///
/// `stamp` pairs the range-query timestamp (lo) with the birth epoch (hi);
/// `link` pairs the tagged next reference (lo) with its version (hi), which is
/// the larger of this node's and the successor's birth epochs. Both pairs are
/// only ever written with a double-width CAS that keeps the birth epoch
/// unchanged within one lifetime. `prior` is written once before the node is
/// published and points at the previous successor of the node's first
/// predecessor.
///
/// Slots are recycled, so every field may be read by a thread holding a stale
/// reference. Fields are atomics for that reason; readers validate the birth
/// epoch after each read.
struct alignas(16) list_node {
  wide_cell stamp;
  wide_cell link;
  std::atomic<list_node *> prior{nullptr};
  std::atomic<key_type> key{0};
  std::atomic<value_type> value{no_value};

  /// Starts a new lifetime: timestamp unset, no successor, fresh birth epoch.
  /// The link version never decreases across lifetimes because a recycled
  /// slot's birth is newer than anything its previous lifetime linked to.
  void begin_lifetime(epoch_type birth) noexcept {
    stamp.store_pair({ts_bottom, birth});
    link.store_pair({0, birth});
  }

  [[nodiscard]] epoch_type birth() const noexcept { return stamp.hi(); }
  [[nodiscard]] timestamp_type ts() const noexcept { return stamp.lo(); }
  [[nodiscard]] link_word next_word() const noexcept { return link.lo(); }
  [[nodiscard]] epoch_type next_version() const noexcept { return link.hi(); }
  [[nodiscard]] list_node *next() const noexcept {
    return link_target<list_node>(link.lo());
  }
};

static_assert(alignof(list_node) >= 4, "two low pointer bits must be free");

}  // namespace rqmap
