#pragma once

/// \file
/// Lock-free ordered map over a versioned linked list with linearizable range
/// queries and version-based reclamation.
///
/// Removal is by replacement: a remover marks its node, and a later trim
/// unlinks the maximal run of marked nodes together with the first unmarked
/// node after it (which trim flags), installing a fresh copy of that node in a
/// single CAS. Every physical change therefore inserts exactly one new node,
/// whose timestamp records when the change took effect and whose `prior`
/// points at the unlinked run. Range queries read the list as of a timestamp
/// by following `prior` from any node that is newer than the query.
///
/// Memory is recycled through a type-preserving pool. Readers never protect
/// nodes; instead each operation records the reclamation epoch at a
/// checkpoint and validates birth epochs as it goes:
///  - after reading any field of a node, its birth epoch must be unchanged;
///  - a successor reached through `next` must not be born after the link's
///    version;
///  - a node reached through `prior` must not be born after the node the
///    pointer was read from.
/// A failed check rolls the operation back to its checkpoint.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rqmap/clocks.hpp"
#include "rqmap/common.hpp"
#include "rqmap/index/index_contract.hpp"
#include "rqmap/instrumentation.hpp"
#include "rqmap/list_node.hpp"
#include "rqmap/object_pool.hpp"
#include "rqmap/tagged_link.hpp"
#include "rqmap/thread_registry.hpp"

// Evaluates a guarded read; on a failed validation returns the enclosing
// function's value-initialized result, which every caller treats as rollback.
#define RQMAP_GUARD(dst, expr)        \
  do {                                \
    auto rqmap_guard_tmp_ = (expr);   \
    if (!rqmap_guard_tmp_) return {}; \
    dst = *rqmap_guard_tmp_;          \
  } while (false)

namespace rqmap {

template <typename Index = no_index>
  requires fast_index<Index>
struct list_options {
  pool_options pool{};
  typename Index::config index{};
};

template <typename Index = no_index, typename Instr = no_instrumentation>
  requires fast_index<Index>
class versioned_list {
 public:
  using node = list_node;
  using index_type = Index;
  using instrumentation_type = Instr;
  using options_type = list_options<Index>;

  explicit versioned_list(options_type options = {}, Instr instr = {})
      : pool_{with_shadow(options.pool), &clock_},
        index_{options.index},
        instr_{std::move(instr)} {
    auto t = pool_.allocate();
    auto h = pool_.allocate();
    tail_ = t.slot;
    head_ = h.slot;
    tail_->key.store(key_max);
    tail_->stamp.store_pair({ts_initial, t.birth});
    head_->key.store(key_min);
    head_->link.store_pair({to_link(tail_), std::max(h.birth, t.birth)});
    head_->stamp.store_pair({ts_initial, h.birth});
  }

  versioned_list(const versioned_list &) = delete;
  versioned_list &operator=(const versioned_list &) = delete;

  /// Adds `key -> value` if `key` is absent and returns no_value; otherwise
  /// returns the present value and changes nothing.
  value_type insert(key_type key, value_type value) {
    check_client_key(key);
    check_client_value(value);
    instr_.op_begin();
    for (;;) {
      const op_context op{pool_.epoch().get()};
      if (auto r = try_insert(key, value, op)) {
        instr_.op_end();
        return *r;
      }
      note_rollback();
    }
  }

  /// Removes `key` and returns its value, or returns no_value if absent.
  value_type remove(key_type key) {
    check_client_key(key);
    instr_.op_begin();
    value_type removed = no_value;
    for (;;) {
      const op_context op{pool_.epoch().get()};
      if (auto r = try_mark(key, op)) {
        if (!r->found) {
          instr_.op_end();
          return no_value;
        }
        removed = r->value;
        break;
      }
      note_rollback();
    }
    if constexpr (!Instr::return_at_mark) {
      // Checkpoint after the mark: the marking thread owns this removal, so a
      // rollback must not send it back to look for the key again.
      for (;;) {
        const op_context op{pool_.epoch().get()};
        if (find(key, op)) break;
        note_rollback();
      }
    }
    instr_.op_end();
    return removed;
  }

  /// Returns the value for `key`, or no_value.
  value_type contains(key_type key) {
    check_client_key(key);
    instr_.op_begin();
    for (;;) {
      const op_context op{pool_.epoch().get()};
      if (auto r = try_contains(key, op)) {
        instr_.op_end();
        return *r;
      }
      note_rollback();
    }
  }

  /// Replaces the contents of `out` with every entry whose key lies in
  /// [low, high], in increasing key order, as of one instant during the call.
  /// Returns the number of entries written.
  std::size_t range_query(key_type low, key_type high, std::vector<entry> &out) {
    check_client_key(low);
    check_client_key(high);
    if (low > high) throw std::invalid_argument("rqmap: range_query with low > high");
    instr_.op_begin();
    for (;;) {
      out.clear();
      const op_context op{pool_.epoch().get()};
      if (auto r = try_range_query(low, high, out, op)) {
        instr_.op_end();
        return *r;
      }
      note_rollback();
    }
  }

  [[nodiscard]] std::vector<entry> range_query(key_type low, key_type high) {
    std::vector<entry> out;
    range_query(low, high, out);
    return out;
  }

  // Timestamp clock.
  [[nodiscard]] timestamp_type get_ts() const noexcept { return clock_.get(); }
  timestamp_type fetch_add_ts() noexcept { return clock_.fetch_add(); }

  // Low-level steps, exposed for scripted scenarios and invariant probes.
  // Each runs under its own checkpoint and retries until it is not rolled back.

  struct node_pair {
    node *pred;
    node *curr;
  };

  /// Returns adjacent (pred, curr) with pred.key < key <= curr.key, excising
  /// any marked runs between them on the way.
  node_pair find_window(key_type key) {
    for (;;) {
      const op_context op{pool_.epoch().get()};
      if (auto w = find(key, op)) return {w->pred.node, w->curr.node};
      note_rollback();
    }
  }

  /// Sets the mark bit on a clean link. False if it was already marked or
  /// flagged.
  bool mark(node *n) { return set_aux_bit(n, mark_mask); }
  /// Sets the flag bit on a clean link. False if it was already marked or
  /// flagged.
  bool flag(node *n) { return set_aux_bit(n, flag_mask); }

  /// Unlinks the marked run starting at `victim` (pred's clean successor) and
  /// the node after it, replacing the latter with a fresh copy.
  bool trim(node *pred, node *victim) {
    for (;;) {
      const op_context op{pool_.epoch().get()};
      const node_ref p = make_ref(pred, pred->birth());
      const node_ref v = make_ref(victim, victim->birth());
      const auto r = trim(p, v, to_link(victim), pred->next_version(), op);
      if (r != trim_result::rollback) return r == trim_result::done;
      note_rollback();
    }
  }

  [[nodiscard]] const node *head_node() const noexcept { return head_; }
  [[nodiscard]] const node *original_tail() const noexcept { return tail_; }

  [[nodiscard]] object_pool<node> &pool() noexcept { return pool_; }
  [[nodiscard]] const object_pool<node> &pool() const noexcept { return pool_; }
  [[nodiscard]] Index &index() noexcept { return index_; }
  [[nodiscard]] Instr &instrumentation() noexcept { return instr_; }

  [[nodiscard]] std::uint64_t rollback_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto &s : stats_) total += s.rollbacks.load(std::memory_order_relaxed);
    return total;
  }

 private:
  struct op_context {
    epoch_type epoch;
  };

  // A node together with the lifetime it was validated in.
  struct node_ref {
    list_node *node = nullptr;
    epoch_type birth = 0;
    std::uint64_t tag = 0;
  };

  struct link_pair {
    link_word word;
    epoch_type version;
  };

  struct window {
    node_ref pred;
    link_word pred_next;
    epoch_type pred_version;
    node_ref curr;
  };

  struct mark_outcome {
    bool found;
    value_type value;
  };

  enum class trim_result { rollback = 0, failed, done };

  struct alignas(64) thread_stats {
    std::atomic<std::uint64_t> rollbacks{0};
  };

  static pool_options with_shadow(pool_options p) {
    if constexpr (Instr::check_lifetime_tags) p.shadow_log = true;
    return p;
  }

  void note_rollback() noexcept {
    stats_[this_thread_index()].rollbacks.fetch_add(1, std::memory_order_relaxed);
    instr_.rollback();
  }

  // ---- guarded reads -------------------------------------------------------

  [[nodiscard]] bool still_valid(const node_ref &r) noexcept {
    if constexpr (Instr::check_lifetime_tags) {
      const auto tag = pool_.tag_of(r.node);
      const bool ok = r.node->birth() == r.birth;
      if (tag != r.tag) instr_.stale_read(!ok);
      return ok;
    } else {
      return r.node->birth() == r.birth;
    }
  }

  [[nodiscard]] node_ref make_ref(node *n, epoch_type birth) const noexcept {
    if constexpr (Instr::check_lifetime_tags)
      return {n, birth, pool_.tag_for(n, birth, [](const node *x) { return x->birth(); })};
    else
      return {n, birth, 0};
  }

  std::optional<link_pair> read_next(const node_ref &r) noexcept {
    // Versions never decrease, so reading the version first can only make
    // the successor check stricter.
    const auto version = r.node->link.hi();
    const auto word = r.node->link.lo();
    if (!still_valid(r)) return std::nullopt;
    return link_pair{word, version};
  }

  std::optional<timestamp_type> read_ts(const node_ref &r) noexcept {
    const auto ts = r.node->stamp.lo();
    if (!still_valid(r)) return std::nullopt;
    return ts;
  }

  std::optional<key_type> read_key(const node_ref &r) noexcept {
    const auto k = r.node->key.load();
    if (!still_valid(r)) return std::nullopt;
    return k;
  }

  std::optional<value_type> read_value(const node_ref &r) noexcept {
    const auto v = r.node->value.load();
    if (!still_valid(r)) return std::nullopt;
    return v;
  }

  /// Dereferences a next link read together with `version`.
  std::optional<node_ref> enter_next(link_word word, epoch_type version,
                                     const op_context &op) noexcept {
    node *n = link_target<node>(word);
    if (n == nullptr) return std::nullopt;
    const auto b = n->birth();
    if (b > version || b > op.epoch) return std::nullopt;
    return make_ref(n, b);
  }

  /// Dereferences `from.prior`.
  std::optional<node_ref> enter_prior(const node_ref &from,
                                      const op_context &op) noexcept {
    node *p = from.node->prior.load();
    if (!still_valid(from) || p == nullptr) return std::nullopt;
    const auto b = p->birth();
    if (b > from.birth || b > op.epoch) return std::nullopt;
    return make_ref(p, b);
  }

  /// Gives a node its timestamp if it has none yet. False means rollback.
  bool publish_ts(const node_ref &r) noexcept {
    const auto ts = r.node->stamp.lo();
    if (!still_valid(r)) return false;
    if (ts == ts_bottom)
      r.node->stamp.compare_exchange({ts_bottom, r.birth}, {clock_.get(), r.birth});
    return true;
  }

  /// Sets mark or flag on a clean link. nullopt means rollback.
  std::optional<bool> set_aux_bit(const node_ref &r, link_word bit) noexcept {
    link_pair cur;
    RQMAP_GUARD(cur, read_next(r));
    if (is_marked_or_flagged(cur.word)) return false;
    return r.node->link.compare_exchange({cur.word, cur.version},
                                         {cur.word | bit, cur.version});
  }

  bool set_aux_bit(node *n, link_word bit) {
    for (;;) {
      if (auto r = set_aux_bit(make_ref(n, n->birth()), bit)) return *r;
    }
  }

  // ---- allocation ----------------------------------------------------------

  /// Allocates a pending node. The caller owns it until it is published.
  node_ref allocate_node(key_type key, value_type value, node *next,
                         epoch_type next_birth, node *prior) {
    const auto a = pool_.allocate();
    node *n = a.slot;
    n->key.store(key);
    n->value.store(value);
    n->prior.store(prior);
    n->link.store_pair({to_link(next), std::max(a.birth, next_birth)});
    return {n, a.birth, a.tag};
  }

  // ---- traversal -----------------------------------------------------------

  struct start_point {
    node_ref pred;
    link_word next;
    epoch_type version;
  };

  /// Picks where find starts: a validated index candidate whose key is below
  /// `key`, or the head sentinel after index_max_attempts failed probes.
  std::optional<start_point> traversal_start(key_type key, const op_context &op) {
    if constexpr (Index::enabled) {
      key_type probe = key;
      for (int attempt = 0; attempt < index_max_attempts; ++attempt) {
        instr_.step();
        node *cand = index_.find_pred(probe);
        if (cand == nullptr) break;
        const auto birth = cand->birth();
        if (birth > op.epoch) return std::nullopt;
        const node_ref r = make_ref(cand, birth);
        const auto ts = cand->stamp.lo();
        const auto version = cand->link.hi();
        const auto next = cand->link.lo();
        const auto cand_key = cand->key.load();
        if (!still_valid(r)) {
          if (cand->birth() > op.epoch) return std::nullopt;
          continue;
        }
        if (cand_key >= key || ts == ts_bottom) continue;
        if (is_marked_or_flagged(next)) {
          probe = cand_key;
          continue;
        }
        return start_point{r, next, version};
      }
    }
    const node_ref h = make_ref(head_, head_->birth());
    link_pair hn;
    RQMAP_GUARD(hn, read_next(h));
    return start_point{h, hn.word, hn.version};
  }

  std::optional<window> find(key_type key, const op_context &op) {
    for (;;) {
      instr_.step();
      start_point start;
      RQMAP_GUARD(start, traversal_start(key, op));
      node_ref pred = start.pred;
      link_word pred_next = start.next;
      epoch_type pred_version = start.version;
      node_ref curr;
      RQMAP_GUARD(curr, enter_next(pred_next, pred_version, op));
      node_ref victim = curr;

      bool restart = false;
      for (;;) {
        instr_.step();
        for (;;) {
          link_pair cn;
          RQMAP_GUARD(cn, read_next(curr));
          if (!is_marked_or_flagged(cn.word) || get_ref(cn.word) == 0) break;
          RQMAP_GUARD(curr, enter_next(cn.word, cn.version, op));
          instr_.step();
        }
        key_type curr_key;
        RQMAP_GUARD(curr_key, read_key(curr));
        if (curr_key >= key) break;
        pred = curr;
        link_pair pn;
        RQMAP_GUARD(pn, read_next(pred));
        if (is_marked_or_flagged(pn.word)) {
          restart = true;
          break;
        }
        pred_next = pn.word;
        pred_version = pn.version;
        RQMAP_GUARD(curr, enter_next(pred_next, pred_version, op));
        victim = curr;
      }
      if (restart) continue;

      if (!publish_ts(pred)) return std::nullopt;
      if (link_target<node>(pred_next) != curr.node) {
        instr_.at(probe_point::find_before_trim);
        const auto t = trim(pred, victim, pred_next, pred_version, op);
        if (t == trim_result::rollback) return std::nullopt;
        if (t == trim_result::failed) continue;
        link_pair pn;
        RQMAP_GUARD(pn, read_next(pred));
        if (is_marked_or_flagged(pn.word)) continue;
        pred_next = pn.word;
        pred_version = pn.version;
        RQMAP_GUARD(curr, enter_next(pred_next, pred_version, op));
        link_pair cn;
        RQMAP_GUARD(cn, read_next(curr));
        key_type curr_key;
        RQMAP_GUARD(curr_key, read_key(curr));
        if (is_marked_or_flagged(cn.word) || curr_key < key) continue;
      }
      if (!publish_ts(curr)) return std::nullopt;
      return window{pred, pred_next, pred_version, curr};
    }
  }

  /// `victim_word` and `pred_version` are what pred.link held when victim was
  /// read from it; the unlinking CAS expects exactly that pair.
  trim_result trim(const node_ref &pred, const node_ref &victim,
                   link_word victim_word, epoch_type pred_version,
                   const op_context &op) {
    node_ref curr = victim;
    for (;;) {
      instr_.step();
      link_pair cn;
      RQMAP_GUARD(cn, read_next(curr));
      if (!is_marked(cn.word)) break;
      RQMAP_GUARD(curr, enter_next(cn.word, cn.version, op));
    }
    if (!publish_ts(curr)) return trim_result::rollback;

    if constexpr (!Instr::skip_flag_step) {
      bool flagged = false;
      RQMAP_GUARD(flagged, set_aux_bit(curr, flag_mask));
      if (!flagged) {
        link_pair cn;
        RQMAP_GUARD(cn, read_next(curr));
        if (!is_flagged(cn.word)) return trim_result::failed;
      }
    }
    instr_.at(probe_point::trim_after_flag);

    link_pair sn;
    RQMAP_GUARD(sn, read_next(curr));
    node *succ = link_target<node>(sn.word);
    epoch_type succ_birth = 0;
    if (succ != nullptr) {
      node_ref s;
      RQMAP_GUARD(s, enter_next(sn.word, sn.version, op));
      if (!publish_ts(s)) return trim_result::rollback;
      succ_birth = s.birth;
    }
    key_type key;
    value_type value;
    RQMAP_GUARD(key, read_key(curr));
    RQMAP_GUARD(value, read_value(curr));

    const node_ref fresh = allocate_node(key, value, succ, succ_birth, victim.node);
    instr_.at(probe_point::trim_before_unlink);
    if (!pred.node->link.compare_exchange(
            {victim_word, pred_version},
            {to_link(fresh.node), std::max(pred.birth, fresh.birth)})) {
      pool_.retire(fresh.node);
      return trim_result::failed;
    }
    publish_own(fresh);
    index_.update(key, fresh.node, fresh.birth);

    // The run is now unreachable and only this thread retires it, so its
    // slots cannot be recycled before the walk below finishes.
    for (node *n = victim.node;;) {
      node *next = n->next();
      const bool last = n == curr.node;
      if (!last) index_.remove(n->key.load(), n);
      if (n != tail_) pool_.retire(n);
      if (last) break;
      n = next;
    }
    return trim_result::done;
  }

  /// Publishes the timestamp of a node this thread just linked. If the node
  /// was already trimmed and recycled the CAS simply fails.
  void publish_own(const node_ref &r) noexcept {
    if (r.node->stamp.lo() == ts_bottom)
      r.node->stamp.compare_exchange({ts_bottom, r.birth}, {clock_.get(), r.birth});
  }

  // ---- operations ------------------------------------------------------------

  std::optional<value_type> try_insert(key_type key, value_type value,
                                       const op_context &op) {
    for (;;) {
      instr_.step();
      window w;
      RQMAP_GUARD(w, find(key, op));
      key_type curr_key;
      RQMAP_GUARD(curr_key, read_key(w.curr));
      if (curr_key == key) {
        value_type v;
        RQMAP_GUARD(v, read_value(w.curr));
        return v;
      }
      const node_ref fresh =
          allocate_node(key, value, w.curr.node, w.curr.birth, w.curr.node);
      instr_.at(probe_point::insert_before_link);
      if (w.pred.node->link.compare_exchange(
              {w.pred_next, w.pred_version},
              {to_link(fresh.node), std::max(w.pred.birth, fresh.birth)})) {
        publish_own(fresh);
        index_.insert(key, fresh.node, fresh.birth);
        return no_value;
      }
      pool_.retire(fresh.node);
    }
  }

  std::optional<mark_outcome> try_mark(key_type key, const op_context &op) {
    for (;;) {
      instr_.step();
      window w;
      RQMAP_GUARD(w, find(key, op));
      key_type curr_key;
      RQMAP_GUARD(curr_key, read_key(w.curr));
      if (curr_key != key) return mark_outcome{false, no_value};
      // Read before marking: once marked, another thread may unlink and
      // recycle the node.
      value_type v;
      RQMAP_GUARD(v, read_value(w.curr));
      bool marked = false;
      RQMAP_GUARD(marked, set_aux_bit(w.curr, mark_mask));
      if (!marked) continue;
      instr_.at(probe_point::remove_after_mark);
      return mark_outcome{true, v};
    }
  }

  std::optional<value_type> try_contains(key_type key, const op_context &op) {
    window w;
    RQMAP_GUARD(w, find(key, op));
    key_type curr_key;
    RQMAP_GUARD(curr_key, read_key(w.curr));
    if (curr_key != key) return no_value;
    value_type v;
    RQMAP_GUARD(v, read_value(w.curr));
    return v;
  }

  /// Follows prior links until reaching a node not newer than `ts`.
  std::optional<node_ref> version_at(node_ref r, timestamp_type ts,
                                     const op_context &op) {
    for (;;) {
      instr_.step();
      timestamp_type t;
      RQMAP_GUARD(t, read_ts(r));
      if (t <= ts) return r;
      RQMAP_GUARD(r, enter_prior(r, op));
    }
  }

  /// The successor of `curr` as of timestamp `ts`.
  std::optional<node_ref> successor_at(const node_ref &curr, timestamp_type ts,
                                       const op_context &op) {
    link_pair n;
    RQMAP_GUARD(n, read_next(curr));
    node_ref succ;
    RQMAP_GUARD(succ, enter_next(n.word, n.version, op));
    if (!publish_ts(succ)) return std::nullopt;
    return version_at(succ, ts, op);
  }

  std::optional<std::size_t> try_range_query(key_type low, key_type high,
                                             std::vector<entry> &out,
                                             const op_context &op) {
    timestamp_type ts = clock_.fetch_add();
    instr_.at(probe_point::range_after_clock);

    // Find a node at or below `low` that was in the list when `ts` ended.
    key_type probe = low;
    node_ref curr;
    for (;;) {
      instr_.step();
      window w;
      RQMAP_GUARD(w, find(probe, op));
      RQMAP_GUARD(probe, read_key(w.pred));
      node_ref pred;
      RQMAP_GUARD(pred, version_at(w.pred, ts, op));
      key_type pred_key;
      RQMAP_GUARD(pred_key, read_key(pred));
      if (pred_key <= low) {
        curr = pred;
        break;
      }
      ts = clock_.get() - 1;
    }

    key_type curr_key;
    RQMAP_GUARD(curr_key, read_key(curr));
    while (curr_key < low) {
      RQMAP_GUARD(curr, successor_at(curr, ts, op));
      RQMAP_GUARD(curr_key, read_key(curr));
    }
    while (curr_key <= high) {
      value_type v;
      RQMAP_GUARD(v, read_value(curr));
      out.push_back({curr_key, v});
      RQMAP_GUARD(curr, successor_at(curr, ts, op));
      RQMAP_GUARD(curr_key, read_key(curr));
    }
    return out.size();
  }

  timestamp_clock clock_;
  object_pool<node> pool_;
  Index index_;
  [[no_unique_address]] Instr instr_;
  node *head_ = nullptr;
  node *tail_ = nullptr;
  std::array<thread_stats, max_threads> stats_{};
};

}  // namespace rqmap

#undef RQMAP_GUARD
