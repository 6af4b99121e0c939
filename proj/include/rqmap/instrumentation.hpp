#pragma once

/// \file
/// Compile-time hooks the list calls at every traversal step and at a few
/// named points. The default policy compiles to nothing; test policies live
/// in rqmap/verify.

#include <cstdint>

namespace rqmap {

enum class probe_point : std::uint8_t {
  find_before_trim,
  trim_after_flag,
  trim_before_unlink,
  insert_before_link,
  remove_after_mark,
  range_after_clock,
};

struct no_instrumentation {
  /// Validate every guarded read against the pool's per-slot lifetime tags.
  static constexpr bool check_lifetime_tags = false;
  /// Negative-control mutant: trim skips flagging the end of the marked run.
  static constexpr bool skip_flag_step = false;
  /// Negative-control mutant: remove returns right after marking, without
  /// waiting for the node to be unlinked.
  static constexpr bool return_at_mark = false;

  void step() noexcept {}
  void at(probe_point) noexcept {}
  void op_begin() noexcept {}
  void op_end() noexcept {}
  void rollback() noexcept {}
  void stale_read(bool /*rolled_back*/) noexcept {}
};

}  // namespace rqmap
