#pragma once

/// \file
/// Concurrent operation histories: recording and well-formedness.
///
/// Every operation gets an invoke and a respond sequence number from one
/// global counter, so the numbers order events consistently with real time.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rqmap/common.hpp"

namespace rqmap::verify {

enum class op_kind : std::uint8_t { insert, remove, contains, range_query };

[[nodiscard]] constexpr std::string_view op_name(op_kind k) noexcept {
  switch (k) {
    case op_kind::insert: return "insert";
    case op_kind::remove: return "remove";
    case op_kind::contains: return "contains";
    case op_kind::range_query: return "rangeQuery";
  }
  return "?";
}

struct history_op {
  std::size_t thread = 0;
  op_kind kind = op_kind::contains;
  key_type key = 0;         // low bound for range queries
  key_type high = 0;        // range queries only
  value_type value = 0;     // insert argument
  value_type result = 0;    // insert/remove/contains
  std::vector<entry> range; // range query result
  std::uint64_t invoke = 0;
  std::uint64_t respond = 0;
};

enum class event_kind : std::uint8_t { invoke, respond };

struct history_event {
  std::size_t thread;
  event_kind kind;
  std::size_t op;  // index into the operation list
  std::uint64_t seq;
};

using history = std::vector<history_op>;

/// Invoke/respond events in sequence order.
[[nodiscard]] inline std::vector<history_event> events_of(const history &h) {
  std::vector<history_event> out;
  out.reserve(2 * h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    out.push_back({h[i].thread, event_kind::invoke, i, h[i].invoke});
    out.push_back({h[i].thread, event_kind::respond, i, h[i].respond});
  }
  std::sort(out.begin(), out.end(),
            [](const history_event &a, const history_event &b) { return a.seq < b.seq; });
  return out;
}

/// Throws std::invalid_argument unless sequence numbers are distinct, each
/// operation responds after it is invoked, and each thread's operations do
/// not overlap.
inline void check_well_formed(const history &h) {
  const auto ev = events_of(h);
  for (std::size_t i = 1; i < ev.size(); ++i)
    if (ev[i].seq == ev[i - 1].seq)
      throw std::invalid_argument("history: duplicate sequence number " + std::to_string(ev[i].seq));
  std::vector<std::size_t> open;
  for (const auto &e : ev) {
    if (open.size() <= e.thread) open.resize(e.thread + 1, SIZE_MAX);
    auto &slot = open[e.thread];
    if (e.kind == event_kind::invoke) {
      if (slot != SIZE_MAX)
        throw std::invalid_argument("history: thread " + std::to_string(e.thread) +
                                    " invokes while an operation is pending");
      slot = e.op;
    } else {
      if (slot != e.op)
        throw std::invalid_argument("history: respond without matching invoke on thread " +
                                    std::to_string(e.thread));
      slot = SIZE_MAX;
    }
  }
  for (auto s : open)
    if (s != SIZE_MAX) throw std::invalid_argument("history: operation never responded");
}

/// Collects operations from concurrent threads.
class history_recorder {
 public:
  template <typename Map>
  value_type insert(Map &m, std::size_t thread, key_type key, value_type value) {
    history_op op{thread, op_kind::insert, key, 0, value, 0, {}, tick(), 0};
    op.result = m.insert(key, value);
    op.respond = tick();
    const auto r = op.result;
    push(std::move(op));
    return r;
  }

  template <typename Map>
  value_type remove(Map &m, std::size_t thread, key_type key) {
    history_op op{thread, op_kind::remove, key, 0, 0, 0, {}, tick(), 0};
    op.result = m.remove(key);
    op.respond = tick();
    const auto r = op.result;
    push(std::move(op));
    return r;
  }

  template <typename Map>
  value_type contains(Map &m, std::size_t thread, key_type key) {
    history_op op{thread, op_kind::contains, key, 0, 0, 0, {}, tick(), 0};
    op.result = m.contains(key);
    op.respond = tick();
    const auto r = op.result;
    push(std::move(op));
    return r;
  }

  template <typename Map>
  std::size_t range_query(Map &m, std::size_t thread, key_type low, key_type high) {
    history_op op{thread, op_kind::range_query, low, high, 0, 0, {}, tick(), 0};
    m.range_query(low, high, op.range);
    op.respond = tick();
    const auto n = op.range.size();
    push(std::move(op));
    return n;
  }

  [[nodiscard]] history take() {
    std::lock_guard lock{mu_};
    history out = std::move(ops_);
    ops_.clear();
    std::sort(out.begin(), out.end(),
              [](const history_op &a, const history_op &b) { return a.invoke < b.invoke; });
    return out;
  }

 private:
  std::uint64_t tick() noexcept { return seq_.fetch_add(1); }

  void push(history_op op) {
    std::lock_guard lock{mu_};
    ops_.push_back(std::move(op));
  }

  std::atomic<std::uint64_t> seq_{1};
  std::mutex mu_;
  history ops_;
};

}  // namespace rqmap::verify
