#pragma once

/// \file
/// Index stand-ins for exercising traversal-start selection.

#include <atomic>

#include "rqmap/common.hpp"
#include "rqmap/index/index_contract.hpp"
#include "rqmap/list_node.hpp"

namespace rqmap::verify {

/// Every candidate it offers is a node whose timestamp was never published,
/// so every probe is wasted and traversals must fall back to the head.
class stale_index {
 public:
  struct config {};
  static constexpr bool enabled = true;

  stale_index() { pending_.begin_lifetime(0); }
  explicit stale_index(config) : stale_index() {}

  list_node *find_pred(key_type) noexcept {
    probes_.fetch_add(1, std::memory_order_relaxed);
    return &pending_;
  }
  void insert(key_type, list_node *, epoch_type) noexcept {}
  void remove(key_type, list_node *) noexcept {}
  void update(key_type, list_node *, epoch_type) noexcept {}

  [[nodiscard]] int probes() const noexcept { return probes_.load(); }
  void reset_probes() noexcept { probes_.store(0); }

 private:
  list_node pending_;
  std::atomic<int> probes_{0};
};

static_assert(fast_index<stale_index>);

}  // namespace rqmap::verify
