#pragma once

/// \file
/// Lock-free skip list used as a fast index over list nodes.
///
/// Each index node maps a key to a (list node, birth epoch) entry. Links at
/// every level are (tagged pointer, version) pairs updated by double-width
/// CAS, with the mark bit meaning "this node is being removed at this level".
/// Index nodes live in their own pool and are read with plain version-based
/// validation: a read is trusted only while the pool epoch is unchanged since
/// the operation started and the node's birth epoch is the one first seen.
///
/// A removed index node is retired by whichever of its inserter and remover
/// finishes last; that thread first runs a search for the key, which unlinks
/// the (fully marked) node from every level it was linked at.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <optional>
#include <random>

#include "rqmap/common.hpp"
#include "rqmap/index/index_contract.hpp"
#include "rqmap/list_node.hpp"
#include "rqmap/object_pool.hpp"
#include "rqmap/tagged_link.hpp"
#include "rqmap/thread_registry.hpp"
#include "rqmap/wide_cell.hpp"

namespace rqmap {

inline constexpr int skiplist_max_level = 20;

struct alignas(16) skiplist_node {
  wide_cell entry;  // lo: list_node*, hi: the list node's birth epoch
  std::array<wide_cell, skiplist_max_level> next;
  std::atomic<epoch_type> birth{0};
  std::atomic<key_type> key{0};
  std::atomic<int> top_level{0};
  std::atomic<std::uint32_t> done{0};

  void begin_lifetime(epoch_type b) noexcept {
    birth.store(b);
    for (auto &n : next) n.store_pair({0, b});
  }
};

class skiplist_index {
 public:
  struct config {
    pool_options pool{};
    std::uint64_t seed = 1;
  };
  static constexpr bool enabled = true;

  skiplist_index() : skiplist_index(config{}) {}

  explicit skiplist_index(config cfg) : pool_{cfg.pool}, seed_{cfg.seed} {
    const auto a = pool_.allocate();
    head_ = a.slot;
    head_birth_ = a.birth;
    head_->key.store(key_min);
    head_->top_level.store(skiplist_max_level);
  }

  skiplist_index(const skiplist_index &) = delete;
  skiplist_index &operator=(const skiplist_index &) = delete;

  /// The list node indexed under the largest key smaller than `key`, or
  /// nullptr if there is none (or the search kept being invalidated).
  list_node *find_pred(key_type key) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      const epoch_type e = pool_.epoch().get();
      if (auto r = search_pred(key, e)) return *r;
    }
    return nullptr;
  }

  /// Indexes `n` under `key`, replacing an existing entry for the key unless
  /// that entry is newer.
  void insert(key_type key, list_node *n, epoch_type birth) { upsert(key, n, birth); }

  /// Points the entry for `key` at `n`. Refused if the incumbent entry has a
  /// higher birth epoch or `n` has already been recycled.
  void update(key_type key, list_node *n, epoch_type birth) { upsert(key, n, birth); }

  /// Drops the entry for `key` if it still refers to `n`.
  void remove(key_type key, list_node *n) {
    for (;;) {
      const epoch_type e = pool_.epoch().get();
      search_result s;
      if (!search(key, e, s)) continue;
      if (!s.found) return;
      const ref victim = s.succs[0];
      const auto cur = victim.node->entry.load_pair();
      if (!valid(victim, e)) continue;
      if (cur.lo != reinterpret_cast<std::uint64_t>(n)) return;
      const auto top = victim.node->top_level.load();
      if (!valid(victim, e)) continue;

      for (int lvl = top - 1; lvl >= 1; --lvl) mark_level(victim.node, lvl);
      if (!mark_level(victim.node, 0)) return;  // someone else removed it
      finish(victim.node, key, removed_bit);
      return;
    }
  }

  [[nodiscard]] object_pool<skiplist_node> &pool() noexcept { return pool_; }

  /// Number of unmarked entries reachable at the bottom level. Quiescent use
  /// only.
  [[nodiscard]] std::size_t size() const noexcept {
    std::size_t count = 0;
    for (auto *n = target(head_->next[0].lo()); n != nullptr; n = target(n->next[0].lo()))
      if (!is_marked(n->next[0].lo())) ++count;
    return count;
  }

 private:
  static constexpr std::uint32_t inserted_bit = 1;
  static constexpr std::uint32_t removed_bit = 2;

  struct ref {
    skiplist_node *node = nullptr;
    epoch_type birth = 0;
  };

  struct search_result {
    std::array<ref, skiplist_max_level> preds;
    std::array<link_word, skiplist_max_level> pred_words;
    std::array<epoch_type, skiplist_max_level> pred_versions;
    std::array<ref, skiplist_max_level> succs;
    bool found = false;
  };

  static skiplist_node *target(link_word w) noexcept {
    return link_target<skiplist_node>(w);
  }

  [[nodiscard]] bool valid(const ref &r, epoch_type e) const noexcept {
    return r.node->birth.load() == r.birth && pool_.epoch().get() == e;
  }

  /// Dereferences a link read with `version`. A null target is a valid end
  /// of level; nullopt means the read must be retried.
  std::optional<ref> enter(link_word w, epoch_type version, epoch_type e) const noexcept {
    auto *n = target(w);
    if (n == nullptr) return ref{};
    const auto b = n->birth.load();
    if (b > version || b > e) return std::nullopt;
    return ref{n, b};
  }

  static epoch_type link_version(const ref &from, const ref &to) noexcept {
    return std::max(from.birth, to.node != nullptr ? to.birth : 0);
  }

  int random_level() {
    thread_local std::mt19937_64 rng{seed_ ^ (0x9e3779b97f4a7c15ULL * (this_thread_index() + 1))};
    const auto bits = rng() | (std::uint64_t{1} << (skiplist_max_level - 1));
    return std::countr_zero(bits) + 1;
  }

  /// Fills preds/succs for every level, snipping marked nodes on the way.
  /// False means the epoch moved or a read was invalidated.
  bool search(key_type key, epoch_type e, search_result &out) {
    for (;;) {
      ref pred{head_, head_birth_};
      bool retry = false;
      for (int lvl = skiplist_max_level - 1; lvl >= 0 && !retry; --lvl) {
        auto pv = pred.node->next[lvl].hi();
        auto pw = pred.node->next[lvl].lo();
        if (!valid(pred, e)) return false;
        auto c = enter(pw, pv, e);
        if (!c) return false;
        ref curr = *c;
        for (;;) {
          if (curr.node == nullptr) break;
          const auto cv = curr.node->next[lvl].hi();
          const auto cw = curr.node->next[lvl].lo();
          if (!valid(curr, e)) return false;
          if (is_marked(cw)) {
            auto s = enter(get_ref(cw), cv, e);
            if (!s) return false;
            const epoch_type nv = link_version(pred, *s);
            if (!pred.node->next[lvl].compare_exchange({pw, pv}, {get_ref(cw), nv})) {
              retry = true;
              break;
            }
            pw = get_ref(cw);
            pv = nv;
            curr = *s;
            continue;
          }
          const auto ck = curr.node->key.load();
          if (!valid(curr, e)) return false;
          if (ck >= key) break;
          pred = curr;
          pw = cw;
          pv = cv;
          auto s = enter(cw, cv, e);
          if (!s) return false;
          curr = *s;
        }
        if (retry) break;
        out.preds[lvl] = pred;
        out.pred_words[lvl] = pw;
        out.pred_versions[lvl] = pv;
        out.succs[lvl] = curr;
      }
      if (retry) continue;
      const ref bottom = out.succs[0];
      out.found = false;
      if (bottom.node != nullptr) {
        const auto k = bottom.node->key.load();
        if (!valid(bottom, e)) return false;
        out.found = k == key;
      }
      return true;
    }
  }

  std::optional<list_node *> search_pred(key_type key, epoch_type e) const {
    ref pred{head_, head_birth_};
    for (int lvl = skiplist_max_level - 1; lvl >= 0; --lvl) {
      auto pv = pred.node->next[lvl].hi();
      auto pw = pred.node->next[lvl].lo();
      if (!valid(pred, e)) return std::nullopt;
      for (;;) {
        auto c = enter(get_ref(pw), pv, e);
        if (!c) return std::nullopt;
        if (c->node == nullptr) break;
        const auto cv = c->node->next[lvl].hi();
        const auto cw = c->node->next[lvl].lo();
        const auto ck = c->node->key.load();
        if (!valid(*c, e)) return std::nullopt;
        if (is_marked(cw)) {
          pw = cw;
          pv = cv;
          continue;
        }
        if (ck >= key) break;
        pred = *c;
        pw = cw;
        pv = cv;
      }
    }
    if (pred.node == head_) return nullptr;
    auto *n = reinterpret_cast<list_node *>(pred.node->entry.lo());
    if (!valid(pred, e)) return std::nullopt;
    return n;
  }

  /// Installs (n, birth) as a node's entry unless refused.
  static void set_entry(skiplist_node *node, list_node *n, epoch_type birth) {
    for (;;) {
      const auto cur = node->entry.load_pair();
      if (cur.hi > birth || n->birth() != birth) return;
      if (node->entry.compare_exchange(cur, {reinterpret_cast<std::uint64_t>(n), birth})) return;
    }
  }

  void upsert(key_type key, list_node *n, epoch_type birth) {
    for (;;) {
      const epoch_type e = pool_.epoch().get();
      search_result s;
      if (!search(key, e, s)) continue;
      if (s.found) {
        set_entry(s.succs[0].node, n, birth);
        return;
      }
      if (n->birth() != birth) return;  // already recycled; nothing to index

      const int top = random_level();
      const auto a = pool_.allocate();
      skiplist_node *node = a.slot;
      const ref self{node, a.birth};
      node->key.store(key);
      node->top_level.store(top);
      node->done.store(0);
      node->entry.store_pair({reinterpret_cast<std::uint64_t>(n), birth});
      for (int lvl = 0; lvl < top; ++lvl)
        node->next[lvl].store_pair({to_link(s.succs[lvl].node), link_version(self, s.succs[lvl])});

      if (!s.preds[0].node->next[0].compare_exchange(
              {s.pred_words[0], s.pred_versions[0]},
              {to_link(node), link_version(s.preds[0], self)})) {
        pool_.retire(node);
        continue;
      }
      link_upper_levels(self, key, top, s);
      finish(node, key, inserted_bit);
      return;
    }
  }

  void link_upper_levels(const ref &self, key_type key, int top, search_result &s) {
    skiplist_node *node = self.node;
    for (int lvl = 1; lvl < top; ++lvl) {
      for (;;) {
        const auto mine = node->next[lvl].load_pair();
        if (is_marked(mine.lo)) return;
        const ref succ = s.succs[lvl];
        if (mine.lo != to_link(succ.node)) {
          if (!node->next[lvl].compare_exchange(
                  mine, {to_link(succ.node), link_version(self, succ)}))
            continue;
        }
        if (s.preds[lvl].node->next[lvl].compare_exchange(
                {s.pred_words[lvl], s.pred_versions[lvl]},
                {to_link(node), link_version(s.preds[lvl], self)}))
          break;
        // Refresh the window; stop if the node is no longer the bottom match.
        for (;;) {
          const epoch_type e = pool_.epoch().get();
          if (search(key, e, s)) break;
        }
        if (s.succs[0].node != node) return;
      }
    }
  }

  /// Sets the mark bit at one level. True if this call set it.
  static bool mark_level(skiplist_node *node, int lvl) {
    for (;;) {
      const auto cur = node->next[lvl].load_pair();
      if (is_marked(cur.lo)) return false;
      if (node->next[lvl].compare_exchange(cur, {cur.lo | mark_mask, cur.hi})) return true;
    }
  }

  /// The second of inserter and remover to get here unlinks and retires.
  void finish(skiplist_node *node, key_type key, std::uint32_t bit) {
    const auto before = node->done.fetch_or(bit);
    if ((before & ~bit) == 0) return;
    for (;;) {
      const epoch_type e = pool_.epoch().get();
      search_result s;
      if (search(key, e, s)) break;
    }
    pool_.retire(node);
  }

  object_pool<skiplist_node> pool_;
  std::uint64_t seed_;
  skiplist_node *head_ = nullptr;
  epoch_type head_birth_ = 0;
};

static_assert(fast_index<skiplist_index>);

}  // namespace rqmap
