#pragma once

/// \file
/// Reusable drivers for the verification suite: oracle scripts, random
/// concurrent histories, the range-snapshot ping-pong, forced-reuse stress
/// with shadow auditing, the suspend-all-but-one proxy, and quiescent probes
/// during a stress run.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "rqmap/index/index_contract.hpp"
#include "rqmap/index/skiplist_index.hpp"
#include "rqmap/verify/history.hpp"
#include "rqmap/verify/linearizability.hpp"
#include "rqmap/verify/oracle.hpp"
#include "rqmap/verify/probe.hpp"
#include "rqmap/verify/shadow_audit.hpp"
#include "rqmap/verify/test_hooks.hpp"
#include "rqmap/versioned_list.hpp"

namespace rqmap::verify {

enum class index_choice { none, skiplist };

[[nodiscard]] inline std::string_view to_string(index_choice c) noexcept {
  return c == index_choice::none ? "none" : "skiplist";
}

/// List options with both pools sized for `slots`.
template <typename Index>
[[nodiscard]] list_options<Index> sized_options(std::size_t slots, std::size_t batch = retire_batch_capacity,
                                                bool shadow = false, std::uint64_t seed = 1) {
  list_options<Index> o;
  o.pool.slots = slots;
  o.pool.batch_size = batch;
  o.pool.shadow_log = shadow;
  if constexpr (std::is_same_v<Index, skiplist_index>) {
    o.index.pool.slots = slots;
    o.index.seed = seed;
  }
  return o;
}

/// Calls `f.template operator()<Index>()` with the index type for `c`.
template <typename F>
decltype(auto) with_index(index_choice c, F &&f) {
  if (c == index_choice::skiplist) return f.template operator()<skiplist_index>();
  return f.template operator()<no_index>();
}

/// Runs `body(worker)` on `n` threads, tagging each with its worker id.
template <typename Body>
void run_workers(std::size_t n, Body &&body) {
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t w = 0; w < n; ++w)
    threads.emplace_back([&body, w] {
      set_worker_id(w);
      body(w);
      set_worker_id(no_worker);
    });
  for (auto &t : threads) t.join();
}

struct op_mix {
  int insert = 30;
  int remove = 30;
  int contains = 30;
  int range = 10;
};

template <typename Rng>
op_kind draw_op(Rng &rng, const op_mix &mix) {
  const int total = mix.insert + mix.remove + mix.contains + mix.range;
  const int x = std::uniform_int_distribution<int>{0, total - 1}(rng);
  if (x < mix.insert) return op_kind::insert;
  if (x < mix.insert + mix.remove) return op_kind::remove;
  if (x < mix.insert + mix.remove + mix.contains) return op_kind::contains;
  return op_kind::range_query;
}

// ---- oracle equivalence ------------------------------------------------------

struct oracle_result {
  std::size_t ops = 0;
  std::size_t mismatches = 0;
  std::string first_mismatch;
};

/// Single-threaded random script compared against the oracle op by op.
template <typename Index>
oracle_result run_oracle_script(std::uint64_t seed, std::size_t ops, key_type key_range) {
  oracle_result r;
  versioned_list<Index> list{sized_options<Index>(recommended_pool_slots(key_range, 1), retire_batch_capacity,
                                                  false, seed)};
  oracle_map oracle;
  std::mt19937_64 rng{seed};
  std::uniform_int_distribution<key_type> key{1, key_range};
  std::vector<entry> got;
  std::vector<entry> want;
  for (std::size_t i = 0; i < ops; ++i) {
    const auto kind = draw_op(rng, {});
    const key_type k = key(rng);
    const value_type v = i + 1;
    bool same = true;
    std::string what;
    switch (kind) {
      case op_kind::insert: {
        const auto a = list.insert(k, v);
        const auto b = oracle.insert(k, v);
        same = a == b;
        what = "insert(" + std::to_string(k) + ") = " + std::to_string(a) + ", expected " + std::to_string(b);
        break;
      }
      case op_kind::remove: {
        const auto a = list.remove(k);
        const auto b = oracle.remove(k);
        same = a == b;
        what = "remove(" + std::to_string(k) + ") = " + std::to_string(a) + ", expected " + std::to_string(b);
        break;
      }
      case op_kind::contains: {
        const auto a = list.contains(k);
        const auto b = oracle.contains(k);
        same = a == b;
        what = "contains(" + std::to_string(k) + ") = " + std::to_string(a) + ", expected " + std::to_string(b);
        break;
      }
      case op_kind::range_query: {
        const key_type hi = std::min<key_type>(k + std::uniform_int_distribution<key_type>{0, 16}(rng), key_range);
        const auto n = list.range_query(k, hi, got);
        oracle.range_query(k, hi, want);
        same = got == want && n == got.size();
        what = "rangeQuery(" + std::to_string(k) + ", " + std::to_string(hi) + ") returned " +
               std::to_string(got.size()) + " entries, expected " + std::to_string(want.size());
        break;
      }
    }
    ++r.ops;
    if (!same) {
      if (r.mismatches == 0) r.first_mismatch = "op " + std::to_string(i) + ": " + what;
      ++r.mismatches;
    }
  }
  return r;
}

// ---- random concurrent histories --------------------------------------------

struct history_spec {
  std::size_t threads = 3;
  std::size_t ops = 30;
  key_type key_range = 8;
  std::uint64_t seed = 1;
  std::uint32_t yield_per_mille = 150;
};

/// Runs a small random workload on a fresh list and returns its history.
template <typename Index, typename Hooks = test_hooks>
history record_random_history(const history_spec &spec) {
  hook_state state;
  state.yield_per_mille.store(spec.yield_per_mille);
  versioned_list<Index, Hooks> list{
      sized_options<Index>(recommended_pool_slots(static_cast<std::size_t>(spec.key_range), spec.threads),
                           retire_batch_capacity, false, spec.seed),
      Hooks{&state}};
  history_recorder rec;
  std::atomic<std::size_t> ready{0};
  run_workers(spec.threads, [&](std::size_t w) {
    std::mt19937_64 rng{spec.seed * 1000003u + w};
    std::uniform_int_distribution<key_type> key{1, spec.key_range};
    const std::size_t mine = spec.ops / spec.threads + (w < spec.ops % spec.threads ? 1 : 0);
    ready.fetch_add(1);
    while (ready.load() < spec.threads) std::this_thread::yield();
    for (std::size_t i = 0; i < mine; ++i) {
      const key_type k = key(rng);
      switch (draw_op(rng, {})) {
        case op_kind::insert: rec.insert(list, w, k, (w + 1) * 1000 + i + 1); break;
        case op_kind::remove: rec.remove(list, w, k); break;
        case op_kind::contains: rec.contains(list, w, k); break;
        case op_kind::range_query: {
          const key_type hi = std::min<key_type>(k + std::uniform_int_distribution<key_type>{0, 4}(rng),
                                                 spec.key_range);
          rec.range_query(list, w, k, hi);
          break;
        }
      }
    }
  });
  return rec.take();
}

struct linearizability_batch {
  std::size_t histories = 0;
  std::size_t accepted = 0;
  std::size_t total_ops = 0;
  std::size_t overlapping_pairs = 0;
  std::uint64_t first_rejected_seed = 0;
};

/// Counts operation pairs whose intervals overlap, as evidence the
/// histories are genuinely concurrent.
[[nodiscard]] inline std::size_t overlapping_pairs(const history &h) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = i + 1; j < h.size(); ++j)
      if (h[i].invoke < h[j].respond && h[j].invoke < h[i].respond) ++n;
  return n;
}

/// `count` histories with thread counts 2..4, key ranges 8..16 and 10..40
/// operations, all derived from `seed`.
template <typename Index>
linearizability_batch check_random_histories(std::size_t count, std::uint64_t seed,
                                             std::size_t max_threads_ = 4, std::size_t max_ops = 40,
                                             key_type max_key_range = 16) {
  linearizability_batch b;
  std::mt19937_64 rng{seed};
  for (std::size_t i = 0; i < count; ++i) {
    history_spec spec;
    spec.threads = std::uniform_int_distribution<std::size_t>{2, std::max<std::size_t>(2, max_threads_)}(rng);
    spec.key_range = std::uniform_int_distribution<key_type>{std::min<key_type>(8, max_key_range), max_key_range}(rng);
    spec.ops = std::uniform_int_distribution<std::size_t>{std::min<std::size_t>(10, max_ops), max_ops}(rng);
    spec.seed = rng();
    const auto h = record_random_history<Index>(spec);
    ++b.histories;
    b.total_ops += h.size();
    b.overlapping_pairs += overlapping_pairs(h);
    if (check_linearizable(h).outcome == verdict::accept)
      ++b.accepted;
    else if (b.first_rejected_seed == 0)
      b.first_rejected_seed = spec.seed;
  }
  return b;
}

// ---- negative controls --------------------------------------------------------

/// List {1, 2}; remove(1) stops right before its unlinking CAS while
/// insert(3) runs to completion; then contains(3). A trim that did not flag
/// node 2 loses the insert.
template <typename Hooks>
history crafted_lost_insert_history() {
  hook_state state;
  std::atomic<int> stage{0};  // 0 idle, 1 remover parked, 2 released
  std::atomic<bool> armed{false};
  state.on_point = [&](probe_point p) {
    if (p != probe_point::trim_before_unlink || worker_id() != 0 || !armed.exchange(false)) return;
    stage.store(1);
    while (stage.load() != 2) std::this_thread::yield();
  };
  versioned_list<no_index, Hooks> list{sized_options<no_index>(256), Hooks{&state}};
  history_recorder rec;
  set_worker_id(2);
  rec.insert(list, 2, 1, 101);
  rec.insert(list, 2, 2, 102);
  set_worker_id(no_worker);

  std::thread remover([&] {
    set_worker_id(0);
    armed.store(true);
    rec.remove(list, 0, 1);
    set_worker_id(no_worker);
  });
  while (stage.load() != 1) std::this_thread::yield();
  std::thread inserter([&] {
    set_worker_id(1);
    rec.insert(list, 1, 3, 103);
    set_worker_id(no_worker);
  });
  inserter.join();
  stage.store(2);
  remover.join();

  set_worker_id(2);
  rec.contains(list, 2, 3);
  rec.range_query(list, 2, 1, 10);
  set_worker_id(no_worker);
  return rec.take();
}

/// insert 1 and 5, remove(5), then rangeQuery(1, 10). A remove that returns
/// at its mark leaves 5 reachable for the range query.
template <typename Hooks>
history crafted_early_remove_history() {
  hook_state state;
  versioned_list<no_index, Hooks> list{sized_options<no_index>(256), Hooks{&state}};
  history_recorder rec;
  rec.insert(list, 0, 1, 101);
  rec.insert(list, 0, 5, 105);
  rec.remove(list, 0, 5);
  rec.range_query(list, 0, 1, 10);
  return rec.take();
}

// ---- range snapshot ping-pong ---------------------------------------------------

struct ping_pong_result {
  std::uint64_t queries = 0;
  std::uint64_t writer_rounds = 0;
  std::uint64_t neither = 0;  // pair that always holds at least one key
  std::uint64_t both = 0;     // pair that never holds both keys
  std::uint64_t pair_a_both = 0;
  std::uint64_t pair_a_one = 0;
  std::uint64_t pair_b_none = 0;
  std::uint64_t pair_b_one = 0;
};

/// Writer 0 cycles keys 10/20 so that at least one is always present; writer
/// 1 cycles keys 30/40 so that at most one is ever present. Readers range
/// over all four and count snapshots breaking either rule.
template <typename Index>
ping_pong_result run_ping_pong(std::chrono::milliseconds duration, std::size_t readers = 4,
                               std::uint64_t seed = 1) {
  constexpr key_type a1 = 10, a2 = 20, b1 = 30, b2 = 40;
  hook_state state;
  state.yield_per_mille.store(20);
  versioned_list<Index, test_hooks> list{sized_options<Index>(recommended_pool_slots(64, readers + 2), retire_batch_capacity,
                                                              false, seed),
                                         test_hooks{&state}};
  for (key_type k = 1; k <= 50; k += 7) list.insert(k, 1000 + static_cast<value_type>(k));
  list.insert(a1, 1);
  list.insert(b1, 3);

  ping_pong_result r;
  std::atomic<bool> stop{false};
  std::atomic<std::uint64_t> queries{0}, rounds{0}, neither{0}, both{0}, a_both{0}, a_one{0}, b_none{0}, b_one{0};
  run_workers(readers + 3, [&](std::size_t w) {
    if (w == readers + 2) {
      std::this_thread::sleep_for(duration);
      stop.store(true);
      return;
    }
    if (w == readers) {
      for (value_type i = 1; !stop.load(); ++i) {
        list.insert(a2, 2 * i);
        list.remove(a1);
        list.insert(a1, 2 * i + 1);
        list.remove(a2);
        rounds.fetch_add(1, std::memory_order_relaxed);
      }
      return;
    }
    if (w == readers + 1) {
      for (value_type i = 1; !stop.load(); ++i) {
        list.remove(b1);
        list.insert(b2, 2 * i);
        list.remove(b2);
        list.insert(b1, 2 * i + 1);
      }
      return;
    }
    std::mt19937_64 rng{seed + w};
    std::vector<entry> out;
    while (!stop.load()) {
      const key_type lo = std::uniform_int_distribution<key_type>{1, a1}(rng);
      const key_type hi = std::uniform_int_distribution<key_type>{b2, 50}(rng);
      list.range_query(lo, hi, out);
      int na = 0, nb = 0;
      for (const auto &e : out) {
        na += e.key == a1 || e.key == a2;
        nb += e.key == b1 || e.key == b2;
      }
      queries.fetch_add(1, std::memory_order_relaxed);
      (na == 2 ? a_both : na == 1 ? a_one : neither).fetch_add(1, std::memory_order_relaxed);
      (nb == 0 ? b_none : nb == 1 ? b_one : both).fetch_add(1, std::memory_order_relaxed);
    }
  });
  r.queries = queries.load();
  r.writer_rounds = rounds.load();
  r.neither = neither.load();
  r.both = both.load();
  r.pair_a_both = a_both.load();
  r.pair_a_one = a_one.load();
  r.pair_b_none = b_none.load();
  r.pair_b_one = b_one.load();
  return r;
}

// ---- forced reuse with shadow auditing -------------------------------------------

struct reuse_stress_spec {
  std::size_t threads = 4;
  std::size_t ops = 1'000'000;  // total over all threads
  std::size_t batch_size = retire_batch_capacity;
  key_type key_range = 32;
  std::uint64_t seed = 1;
  std::uint32_t yield_per_mille = 5;
};

struct reuse_stress_result {
  audit_report audit;
  std::uint64_t ops = 0;
  std::uint64_t stale_caught = 0;
  std::uint64_t stale_missed = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t epoch_advances = 0;
  std::uint64_t recycled_batches = 0;
  std::size_t peak_unreclaimed = 0;
  std::size_t samples = 0;
  bool final_probe_ok = false;
};

template <typename Index>
reuse_stress_result run_reuse_stress(const reuse_stress_spec &spec) {
  hook_state state;
  state.yield_per_mille.store(spec.yield_per_mille);
  const auto slots = recommended_pool_slots(static_cast<std::size_t>(spec.key_range), spec.threads);
  versioned_list<Index, shadow_hooks> list{sized_options<Index>(slots, spec.batch_size, true, spec.seed),
                                           shadow_hooks{&state}};
  std::atomic<std::size_t> peak{0};
  std::atomic<std::size_t> samples{0};
  auto sample = [&] {
    const auto g = list.pool().retired_unreclaimed();
    auto cur = peak.load();
    while (g > cur && !peak.compare_exchange_weak(cur, g)) {
    }
    samples.fetch_add(1, std::memory_order_relaxed);
  };

  run_workers(spec.threads, [&](std::size_t w) {
    std::mt19937_64 rng{spec.seed * 7919 + w};
    std::uniform_int_distribution<key_type> key{1, spec.key_range};
    const std::size_t mine = spec.ops / spec.threads;
    std::vector<entry> out;
    for (std::size_t i = 0; i < mine; ++i) {
      const key_type k = key(rng);
      switch (draw_op(rng, {40, 40, 10, 10})) {
        case op_kind::insert: list.insert(k, i + 1); break;
        case op_kind::remove: list.remove(k); break;
        case op_kind::contains: list.contains(k); break;
        case op_kind::range_query: list.range_query(k, std::min<key_type>(k + 8, spec.key_range), out); break;
      }
      if (i % 16 == 0) sample();
    }
  });
  sample();

  reuse_stress_result r;
  r.ops = state.ops.load();
  r.stale_caught = state.stale_caught.load();
  r.stale_missed = state.stale_missed.load();
  r.rollbacks = list.rollback_count();
  r.epoch_advances = list.pool().epoch().advance_count();
  r.recycled_batches = list.pool().recycled_batch_count();
  r.peak_unreclaimed = peak.load();
  r.samples = samples.load();
  r.final_probe_ok = probe_structure(list).ok();
  r.audit = audit_shadow_log({list.pool().shadow_log(), r.stale_caught, r.stale_missed, r.peak_unreclaimed,
                              spec.threads});
  return r;
}

// ---- suspend all but one ------------------------------------------------------------

struct suspension_result {
  std::size_t rounds = 0;
  std::size_t completed = 0;
  std::size_t timeouts = 0;
  std::uint64_t max_steps = 0;
};

/// Workers run a random mix; `rounds` times, all but one randomly chosen
/// worker are parked inside their next traversal step and the survivor's
/// steps to finish its operation are counted.
template <typename Index>
suspension_result run_suspension_proxy(std::size_t threads, std::size_t rounds, std::uint64_t limit,
                                       std::uint64_t seed, key_type key_range = 64) {
  hook_state state;
  state.yield_per_mille.store(20);
  state.suspend.limit = limit;
  versioned_list<Index, test_hooks> list{
      sized_options<Index>(recommended_pool_slots(static_cast<std::size_t>(key_range), threads) * 2,
                           retire_batch_capacity, false, seed),
      test_hooks{&state}};
  for (key_type k = 1; k <= key_range; k += 2) list.insert(k, static_cast<value_type>(k));

  suspension_result r;
  std::atomic<bool> stop{false};
  run_workers(threads + 1, [&](std::size_t w) {
    if (w < threads) {
      std::mt19937_64 rng{seed * 31 + w};
      std::uniform_int_distribution<key_type> key{1, key_range};
      std::vector<entry> out;
      for (value_type i = 1; !stop.load(); ++i) {
        const key_type k = key(rng);
        switch (draw_op(rng, {})) {
          case op_kind::insert: list.insert(k, i); break;
          case op_kind::remove: list.remove(k); break;
          case op_kind::contains: list.contains(k); break;
          case op_kind::range_query: list.range_query(k, std::min<key_type>(k + 16, key_range), out); break;
        }
      }
      return;
    }
    // Controller.
    std::mt19937_64 rng{seed};
    auto &s = state.suspend;
    for (std::size_t round = 0; round < rounds; ++round) {
      std::this_thread::sleep_for(std::chrono::microseconds(std::uniform_int_distribution<int>{50, 2000}(rng)));
      s.steps.store(0);
      s.counting.store(false);
      s.finished.store(false);
      s.others.store(static_cast<int>(threads) - 1);
      s.runner.store(std::uniform_int_distribution<std::size_t>{0, threads - 1}(rng));
      s.active.store(true);
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
      while (!s.finished.load() && std::chrono::steady_clock::now() < deadline) std::this_thread::yield();
      const auto steps = s.steps.load();
      ++r.rounds;
      if (s.finished.load() && steps <= limit)
        ++r.completed;
      else
        ++r.timeouts;
      r.max_steps = std::max(r.max_steps, steps);
      s.active.store(false);
      while (s.parked.load() != 0) std::this_thread::yield();
    }
    stop.store(true);
  });
  return r;
}

// ---- quiescent probes during a stress run ----------------------------------------

struct probe_stress_result {
  std::size_t probes = 0;
  std::vector<std::string> violations;
  std::size_t truncated_chains = 0;
};

/// Pauses all workers between operations `probes` times, probing the list
/// and checking that dead links seen earlier have not changed.
template <typename Index>
probe_stress_result run_probe_stress(std::size_t threads, std::size_t ops, key_type key_range, std::size_t probes,
                                     std::uint64_t seed) {
  hook_state state;
  state.yield_per_mille.store(20);
  versioned_list<Index, test_hooks> list{
      sized_options<Index>(recommended_pool_slots(static_cast<std::size_t>(key_range), threads),
                           retire_batch_capacity, false, seed),
      test_hooks{&state}};
  probe_stress_result r;
  std::atomic<int> running{static_cast<int>(threads)};
  run_workers(threads + 1, [&](std::size_t w) {
    if (w < threads) {
      std::mt19937_64 rng{seed * 131 + w};
      std::uniform_int_distribution<key_type> key{1, key_range};
      std::vector<entry> out;
      for (std::size_t i = 0; i < ops / threads; ++i) {
        const key_type k = key(rng);
        switch (draw_op(rng, {})) {
          case op_kind::insert: list.insert(k, i + 1); break;
          case op_kind::remove: list.remove(k); break;
          case op_kind::contains: list.contains(k); break;
          case op_kind::range_query: list.range_query(k, std::min<key_type>(k + 16, key_range), out); break;
        }
      }
      running.fetch_sub(1);
      return;
    }
    std::mt19937_64 rng{seed};
    list_snapshot previous;
    bool have_previous = false;
    for (std::size_t p = 0; p < probes && running.load() > 0; ++p) {
      std::this_thread::sleep_for(std::chrono::microseconds(std::uniform_int_distribution<int>{100, 3000}(rng)));
      state.pause_requested.store(true);
      while (state.paused.load() != running.load()) std::this_thread::yield();
      auto snap = take_snapshot(list);
      state.pause_requested.store(false);
      const auto rep = check_snapshot(snap);
      ++r.probes;
      r.truncated_chains += rep.truncated_chains;
      r.violations.insert(r.violations.end(), rep.violations.begin(), rep.violations.end());
      if (have_previous) {
        const auto dead = check_dead_links_stable(previous, snap);
        r.violations.insert(r.violations.end(), dead.begin(), dead.end());
      }
      previous = std::move(snap);
      have_previous = true;
    }
  });
  const auto final_rep = probe_structure(list);
  ++r.probes;
  r.violations.insert(r.violations.end(), final_rep.violations.begin(), final_rep.violations.end());
  return r;
}

}  // namespace rqmap::verify
