#pragma once

/// \file
/// Linearizability checking for small map histories.
///
/// Depth-first search over linearization orders: at each step any pending
/// operation invoked before the earliest outstanding response may go next,
/// provided its recorded result matches the sequential map. Failed
/// (linearized set, map state) pairs are memoized.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "rqmap/verify/history.hpp"
#include "rqmap/verify/oracle.hpp"

namespace rqmap::verify {

enum class verdict : std::uint8_t { accept, reject };

struct linearizability_result {
  verdict outcome = verdict::reject;
  /// A witness order (indices into the history) when accepted.
  std::vector<std::size_t> order;
  std::size_t states_visited = 0;
};

namespace detail {

struct memo_key {
  std::uint64_t done;
  std::vector<entry> state;
  friend bool operator==(const memo_key &, const memo_key &) = default;
};

struct memo_hash {
  std::size_t operator()(const memo_key &k) const noexcept {
    std::size_t h = std::hash<std::uint64_t>{}(k.done);
    for (const auto &e : k.state)
      h = h * 1000003u ^ (std::hash<key_type>{}(e.key) * 31u + std::hash<value_type>{}(e.value));
    return h;
  }
};

class lin_search {
 public:
  explicit lin_search(const history &h) : h_{h} {}

  bool run(linearizability_result &out) {
    oracle_map m;
    const bool ok = dfs(0, m, out.order);
    out.states_visited = visited_;
    return ok;
  }

 private:
  static std::vector<entry> flatten(const oracle_map &m) {
    std::vector<entry> v;
    v.reserve(m.size());
    for (const auto &[k, val] : m.contents()) v.push_back({k, val});
    return v;
  }

  static bool apply(const history_op &op, oracle_map &m) {
    switch (op.kind) {
      case op_kind::insert: return m.insert(op.key, op.value) == op.result;
      case op_kind::remove: return m.remove(op.key) == op.result;
      case op_kind::contains: return m.contains(op.key) == op.result;
      case op_kind::range_query: return m.range_query(op.key, op.high) == op.range;
    }
    return false;
  }

  bool dfs(std::uint64_t done, const oracle_map &m, std::vector<std::size_t> &order) {
    const std::size_t n = h_.size();
    if (order.size() == n) return true;
    memo_key key{done, flatten(m)};
    if (failed_.count(key) != 0) return false;
    ++visited_;

    std::uint64_t min_respond = UINT64_MAX;
    for (std::size_t i = 0; i < n; ++i)
      if ((done >> i & 1u) == 0) min_respond = std::min(min_respond, h_[i].respond);

    for (std::size_t i = 0; i < n; ++i) {
      if ((done >> i & 1u) != 0 || h_[i].invoke > min_respond) continue;
      oracle_map next = m;
      if (!apply(h_[i], next)) continue;
      order.push_back(i);
      if (dfs(done | (std::uint64_t{1} << i), next, order)) return true;
      order.pop_back();
    }
    failed_.insert(std::move(key));
    return false;
  }

  const history &h_;
  std::unordered_set<memo_key, memo_hash> failed_;
  std::size_t visited_ = 0;
};

}  // namespace detail

/// Accepts iff some order consistent with real time replays on the
/// sequential map. Throws std::invalid_argument on malformed histories or
/// more than 64 operations.
[[nodiscard]] inline linearizability_result check_linearizable(const history &h) {
  if (h.size() > 64) throw std::invalid_argument("history: more than 64 operations");
  check_well_formed(h);
  linearizability_result r;
  detail::lin_search s{h};
  r.outcome = s.run(r) ? verdict::accept : verdict::reject;
  if (r.outcome == verdict::reject) r.order.clear();
  return r;
}

}  // namespace rqmap::verify
