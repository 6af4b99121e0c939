#pragma once

/// \file
/// Structural invariant probes over a quiescent list.
///
/// A probe first copies the reachable list and the prior chains hanging off
/// it into a plain snapshot, then checks the snapshot. Checking a copy lets
/// tests corrupt it on purpose.

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "rqmap/common.hpp"
#include "rqmap/list_node.hpp"
#include "rqmap/tagged_link.hpp"

namespace rqmap::verify {

struct node_view {
  const list_node *addr = nullptr;
  key_type key = 0;
  value_type value = 0;
  timestamp_type ts = 0;
  epoch_type birth = 0;
  link_word next = 0;
  epoch_type next_version = 0;
  const list_node *prior = nullptr;
};

struct list_snapshot {
  /// Head to the end of the next chain, in order.
  std::vector<node_view> path;
  /// Every node seen, reachable or prior-reachable.
  std::unordered_map<const list_node *, node_view> nodes;
  const list_node *head = nullptr;
  const list_node *original_tail = nullptr;
  /// Whether any slot has been recycled. Without recycling, a prior target
  /// born after its referrer can only be a bug.
  bool recycling = false;
};

struct probe_report {
  std::vector<std::string> violations;
  /// Keys and values on the next chain, sentinels excluded.
  std::vector<entry> logical;
  std::size_t prior_chains = 0;
  /// Prior chains that ended at a recycled slot rather than at the tail.
  std::size_t truncated_chains = 0;

  [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
};

inline constexpr std::size_t probe_step_limit = 1u << 22;

[[nodiscard]] inline node_view view_of(const list_node *n) noexcept {
  return {n,
          n->key.load(),
          n->value.load(),
          n->ts(),
          n->birth(),
          n->next_word(),
          n->next_version(),
          n->prior.load()};
}

/// Copies the list. Call only while no operation is running.
template <typename List>
[[nodiscard]] list_snapshot take_snapshot(const List &list) {
  list_snapshot s;
  s.head = list.head_node();
  s.original_tail = list.original_tail();
  s.recycling = list.pool().recycled_batch_count() != 0;

  const list_node *n = s.head;
  for (std::size_t steps = 0; n != nullptr && steps < probe_step_limit; ++steps) {
    const auto v = view_of(n);
    s.path.push_back(v);
    s.nodes.emplace(n, v);
    n = link_target<const list_node>(v.next);
  }
  for (const auto &v : s.path) {
    const list_node *p = v.prior;
    for (std::size_t steps = 0; p != nullptr && steps < probe_step_limit; ++steps) {
      if (s.nodes.count(p) != 0) break;
      const auto pv = view_of(p);
      s.nodes.emplace(p, pv);
      p = pv.prior;
    }
  }
  return s;
}

[[nodiscard]] inline probe_report check_snapshot(const list_snapshot &s) {
  probe_report r;
  auto fail = [&r](std::string msg) { r.violations.push_back(std::move(msg)); };
  auto describe = [](const node_view &v) {
    return "node(key=" + std::to_string(v.key) + ", ts=" + std::to_string(v.ts) +
           ", birth=" + std::to_string(v.birth) + ")";
  };

  if (s.path.empty() || s.path.front().addr != s.head) {
    fail("path does not start at the head sentinel");
    return r;
  }
  if (s.path.size() >= probe_step_limit) fail("next chain does not terminate");

  for (std::size_t i = 1; i < s.path.size(); ++i)
    if (!(s.path[i - 1].key < s.path[i].key))
      fail("keys not strictly increasing: " + describe(s.path[i - 1]) + " -> " +
           describe(s.path[i]));

  const auto &last = s.path.back();
  if (last.key != key_max || get_ref(last.next) != 0)
    fail("tail sentinel not reachable; chain ends at " + describe(last));

  for (const auto &v : s.path) {
    if (is_marked(v.next) && is_flagged(v.next)) fail("link both marked and flagged: " + describe(v));
    if (is_marked_or_flagged(v.next) && v.ts == ts_bottom)
      fail("marked or flagged node still pending: " + describe(v));
    if (v.addr != s.head && v.key != key_max && v.key != key_min) r.logical.push_back({v.key, v.value});
  }

  // Prior chains: timestamps never increase, births never increase within
  // valid lifetimes, and an unbroken chain ends at the original tail.
  for (const auto &v : s.path) {
    if (v.addr == s.head) continue;
    ++r.prior_chains;
    node_view cur = v;
    std::size_t steps = 0;
    for (;; ++steps) {
      if (steps >= probe_step_limit) {
        fail("prior chain does not terminate from " + describe(v));
        break;
      }
      if (cur.prior == nullptr) {
        if (cur.addr != s.original_tail)
          fail("prior chain from " + describe(v) + " ends at " + describe(cur) +
               " instead of the original tail");
        break;
      }
      const auto it = s.nodes.find(cur.prior);
      if (it == s.nodes.end()) {
        fail("prior target missing from snapshot");
        break;
      }
      const node_view &p = it->second;
      if (p.birth > cur.birth) {
        if (!s.recycling)
          fail("prior birth epoch increases without recycling: " + describe(cur) + " -> " +
               describe(p));
        ++r.truncated_chains;
        break;
      }
      if (cur.ts != ts_bottom && p.ts != ts_bottom && p.ts > cur.ts)
        fail("prior timestamp increases: " + describe(cur) + " -> " + describe(p));
      cur = p;
    }
  }
  return r;
}

template <typename List>
[[nodiscard]] probe_report probe_structure(const List &list) {
  return check_snapshot(take_snapshot(list));
}

/// Dead links must never change: every marked or flagged link in `before`
/// whose node is in `after` with the same birth epoch must be identical.
[[nodiscard]] inline std::vector<std::string> check_dead_links_stable(const list_snapshot &before,
                                                                      const list_snapshot &after) {
  std::vector<std::string> out;
  for (const auto &[addr, v] : before.nodes) {
    if (!is_marked_or_flagged(v.next)) continue;
    const auto it = after.nodes.find(addr);
    if (it == after.nodes.end() || it->second.birth != v.birth) continue;
    if (it->second.next != v.next)
      out.push_back("dead link of key " + std::to_string(v.key) + " changed");
  }
  return out;
}

}  // namespace rqmap::verify
