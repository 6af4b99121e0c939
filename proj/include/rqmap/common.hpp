#pragma once

/// \file
/// Key/value words, reserved sentinels and clock constants shared by every
/// rqmap component.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace rqmap {

using key_type = std::int64_t;
using value_type = std::uint64_t;
using timestamp_type = std::uint64_t;
using epoch_type = std::uint64_t;

/// Key of the head sentinel. Client keys must be strictly greater.
inline constexpr key_type key_min = std::numeric_limits<key_type>::min();
/// Key of the tail sentinel. Client keys must be strictly smaller.
inline constexpr key_type key_max = std::numeric_limits<key_type>::max();

/// Returned by insert/remove/contains to mean "key absent". Client values
/// must be nonzero.
inline constexpr value_type no_value = 0;

/// Timestamp of a node that has not been published yet.
inline constexpr timestamp_type ts_bottom = 1;
/// First value of the range-query clock; also the timestamp of both sentinels.
inline constexpr timestamp_type ts_initial = 2;

/// First value of the reclamation epoch clock. Fresh pool batches are stamped
/// with an earlier epoch so that handing them out never forces a tick.
inline constexpr epoch_type epoch_initial = 1;

/// Entries per retire batch (and per allocation batch).
inline constexpr std::size_t retire_batch_capacity = 64;

struct entry {
  key_type key;
  value_type value;

  friend bool operator==(const entry &, const entry &) = default;
};

[[nodiscard]] constexpr bool is_client_key(key_type k) noexcept {
  return k > key_min && k < key_max;
}

inline void check_client_key(key_type k) {
  if (!is_client_key(k))
    throw std::invalid_argument("rqmap: key " + std::to_string(k) +
                                " is reserved for a sentinel");
}

inline void check_client_value(value_type v) {
  if (v == no_value)
    throw std::invalid_argument("rqmap: value 0 is reserved for no_value");
}

/// Thrown when an object pool has no free batch left. Pools are sized up
/// front, so this is a configuration error rather than a transient state.
class pool_exhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rqmap
