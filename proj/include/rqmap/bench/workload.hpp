#pragma once

/// \file
/// Fixed-time mixed-workload benchmark: prefill half the key range, run
/// workers on a random operation mix until a stop flag, merge per-thread
/// counters.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rqmap/common.hpp"
#include "rqmap/index/index_contract.hpp"
#include "rqmap/index/skiplist_index.hpp"
#include "rqmap/object_pool.hpp"
#include "rqmap/versioned_list.hpp"

namespace rqmap::bench {

enum class index_kind { none, skiplist };

[[nodiscard]] inline std::string to_string(index_kind k) { return k == index_kind::none ? "none" : "skiplist"; }

[[nodiscard]] inline index_kind parse_index_kind(const std::string &s) {
  if (s == "none") return index_kind::none;
  if (s == "skiplist") return index_kind::skiplist;
  throw std::invalid_argument("unknown index '" + s + "' (expected none or skiplist)");
}

/// Percentages of insert, remove, contains and range query.
struct op_mix {
  int insert = 25;
  int remove = 25;
  int contains = 40;
  int range = 10;

  friend bool operator==(const op_mix &, const op_mix &) = default;
};

/// Parses "i:r:c:q".
[[nodiscard]] inline op_mix parse_mix(const std::string &s) {
  op_mix m;
  int *fields[] = {&m.insert, &m.remove, &m.contains, &m.range};
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const auto end = i < 3 ? s.find(':', pos) : s.size();
    if (end == std::string::npos) throw std::invalid_argument("mix must look like i:r:c:q, got '" + s + "'");
    const auto part = s.substr(pos, end - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (part.empty() || used != part.size() || v < 0)
      throw std::invalid_argument("bad mix component '" + part + "' in '" + s + "'");
    *fields[i] = v;
    pos = end + 1;
  }
  return m;
}

[[nodiscard]] inline std::string to_string(const op_mix &m) {
  return std::to_string(m.insert) + ":" + std::to_string(m.remove) + ":" + std::to_string(m.contains) + ":" +
         std::to_string(m.range);
}

struct workload_spec {
  std::size_t threads = 1;
  double duration_s = 1.0;
  key_type key_range = 1 << 16;
  op_mix mix{};
  key_type rq_size = 256;
  std::uint64_t seed = 1;
  index_kind index = index_kind::none;
  /// Extra threads that only run range queries.
  std::size_t rq_threads = 0;
  /// 0 picks a size from the key range and thread count.
  std::size_t pool_slots = 0;
  /// Per-thread operation budget; 0 means run until the duration elapses.
  std::uint64_t max_ops_per_thread = 0;
};

/// Throws std::invalid_argument describing the first problem found.
inline void validate(const workload_spec &s) {
  const auto &m = s.mix;
  if (m.insert + m.remove + m.contains + m.range != 100)
    throw std::invalid_argument("mix must sum to 100, got " + to_string(m));
  if (s.threads == 0 && s.rq_threads == 0) throw std::invalid_argument("need at least one thread");
  if (s.threads + s.rq_threads > max_threads - 8) throw std::invalid_argument("too many threads");
  if (!(s.duration_s > 0)) throw std::invalid_argument("duration must be positive");
  if (s.key_range < 2) throw std::invalid_argument("key range must be at least 2");
  if (s.key_range >= key_max - 1) throw std::invalid_argument("key range too large");
  if (s.rq_size < 1 || s.rq_size >= s.key_range)
    throw std::invalid_argument("rq size must be in [1, key range)");
}

struct bench_report {
  std::uint64_t inserts = 0;
  std::uint64_t removes = 0;
  std::uint64_t contains = 0;
  std::uint64_t range_queries = 0;
  std::uint64_t total_ops = 0;
  double elapsed_s = 0;
  double throughput = 0;  // operations per second
  std::uint64_t rollbacks = 0;
  std::uint64_t epoch_advances = 0;
  std::size_t peak_unreclaimed = 0;
  std::size_t pool_slots = 0;
  std::size_t prefilled = 0;
  /// Final contents, for reproducibility checks.
  std::size_t final_size = 0;
  std::uint64_t final_digest = 0;
};

namespace detail {

struct alignas(64) thread_counts {
  std::uint64_t inserts = 0;
  std::uint64_t removes = 0;
  std::uint64_t contains = 0;
  std::uint64_t range_queries = 0;
};

template <typename Map>
void prefill(Map &map, const workload_spec &s, std::size_t &count) {
  std::mt19937_64 rng{s.seed};
  std::uniform_int_distribution<key_type> key{1, s.key_range};
  const auto target = static_cast<std::size_t>(s.key_range / 2);
  while (count < target)
    if (map.insert(key(rng), static_cast<value_type>(count) + 1) == no_value) ++count;
}

template <typename Map>
void worker_loop(Map &map, const workload_spec &s, const op_mix &mix, std::uint64_t seed,
                 const std::atomic<bool> &stop, thread_counts &out) {
  std::mt19937_64 rng{seed};
  std::uniform_int_distribution<key_type> key{1, s.key_range};
  std::uniform_int_distribution<int> pick{0, 99};
  std::vector<entry> buf;
  buf.reserve(static_cast<std::size_t>(s.rq_size));
  thread_counts c;
  for (std::uint64_t i = 0; !stop.load(std::memory_order_relaxed); ++i) {
    if (s.max_ops_per_thread != 0 && i >= s.max_ops_per_thread) break;
    const int x = pick(rng);
    const key_type k = key(rng);
    if (x < mix.insert) {
      map.insert(k, i + 1);
      ++c.inserts;
    } else if (x < mix.insert + mix.remove) {
      map.remove(k);
      ++c.removes;
    } else if (x < mix.insert + mix.remove + mix.contains) {
      map.contains(k);
      ++c.contains;
    } else {
      map.range_query(k, std::min<key_type>(k + s.rq_size - 1, s.key_range), buf);
      ++c.range_queries;
    }
  }
  out = c;
}

template <typename Index>
bench_report run_with(const workload_spec &s) {
  bench_report r;
  const std::size_t all_threads = s.threads + s.rq_threads;
  r.pool_slots = s.pool_slots != 0
                     ? s.pool_slots
                     : pool_slots_from_env(recommended_pool_slots(static_cast<std::size_t>(s.key_range), all_threads));
  list_options<Index> opts;
  opts.pool.slots = r.pool_slots;
  if constexpr (std::is_same_v<Index, skiplist_index>) {
    opts.index.pool.slots = r.pool_slots;
    opts.index.seed = s.seed;
  }
  versioned_list<Index> map{opts};
  prefill(map, s, r.prefilled);

  std::atomic<bool> stop{false};
  std::atomic<bool> failed{false};
  std::string failure;
  std::vector<thread_counts> counts(all_threads);
  std::vector<std::thread> workers;
  const op_mix rq_only{0, 0, 0, 100};
  std::atomic<std::size_t> finished{0};

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t w = 0; w < all_threads; ++w)
    workers.emplace_back([&, w] {
      try {
        worker_loop(map, s, w < s.threads ? s.mix : rq_only, s.seed * 0x9e3779b97f4a7c15ULL + w + 1, stop,
                    counts[w]);
      } catch (const pool_exhausted &e) {
        if (!failed.exchange(true)) failure = e.what();
        stop.store(true);
      }
      finished.fetch_add(1);
    });

  const auto deadline = t0 + std::chrono::duration<double>(s.duration_s);
  while (std::chrono::steady_clock::now() < deadline && finished.load() < all_threads) {
    r.peak_unreclaimed = std::max(r.peak_unreclaimed, map.pool().retired_unreclaimed());
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  stop.store(true);
  for (auto &t : workers) t.join();
  const auto t1 = std::chrono::steady_clock::now();
  r.peak_unreclaimed = std::max(r.peak_unreclaimed, map.pool().retired_unreclaimed());
  if (failed.load()) throw pool_exhausted(failure);

  for (const auto &c : counts) {
    r.inserts += c.inserts;
    r.removes += c.removes;
    r.contains += c.contains;
    r.range_queries += c.range_queries;
  }
  r.total_ops = r.inserts + r.removes + r.contains + r.range_queries;
  r.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
  r.throughput = r.elapsed_s > 0 ? static_cast<double>(r.total_ops) / r.elapsed_s : 0;
  r.rollbacks = map.rollback_count();
  r.epoch_advances = map.pool().epoch().advance_count();

  std::vector<entry> all;
  map.range_query(1, s.key_range, all);
  r.final_size = all.size();
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto &e : all) h = (h ^ static_cast<std::uint64_t>(e.key)) * 1099511628211ULL;
  r.final_digest = h;
  return r;
}

}  // namespace detail

/// Runs one benchmark. Throws std::invalid_argument for a bad spec and
/// pool_exhausted if the pool is too small for the run.
[[nodiscard]] inline bench_report run_benchmark(const workload_spec &s) {
  validate(s);
  if (s.index == index_kind::skiplist) return detail::run_with<skiplist_index>(s);
  return detail::run_with<no_index>(s);
}

[[nodiscard]] inline std::string csv_header() {
  return "threads,duration_s,key_range,mix,rq_size,seed,index,rq_threads,pool_slots,"
         "inserts,removes,contains,range_queries,total_ops,elapsed_s,throughput_ops_s,"
         "rollbacks,epoch_advances,peak_unreclaimed";
}

[[nodiscard]] inline std::string csv_row(const workload_spec &s, const bench_report &r) {
  std::ostringstream o;
  o << s.threads << ',' << s.duration_s << ',' << s.key_range << ',' << to_string(s.mix) << ',' << s.rq_size << ','
    << s.seed << ',' << to_string(s.index) << ',' << s.rq_threads << ',' << r.pool_slots << ',' << r.inserts << ','
    << r.removes << ',' << r.contains << ',' << r.range_queries << ',' << r.total_ops << ',' << r.elapsed_s << ','
    << static_cast<std::uint64_t>(r.throughput) << ',' << r.rollbacks << ',' << r.epoch_advances << ','
    << r.peak_unreclaimed;
  return o.str();
}

}  // namespace rqmap::bench
