#pragma once

/// \file
/// Mark and flag bits carried in the two low bits of a node reference.
///
/// A link word is either clean, marked (bit 0) or flagged (bit 1), never both.
/// Nodes are at least 16-byte aligned so the low bits are always free.

#include <cstdint>

namespace rqmap {

using link_word = std::uintptr_t;

inline constexpr link_word mark_mask = 0x1;
inline constexpr link_word flag_mask = 0x2;
inline constexpr link_word aux_mask = 0x3;

[[nodiscard]] constexpr bool is_marked(link_word w) noexcept {
  return (w & mark_mask) != 0;
}

[[nodiscard]] constexpr bool is_flagged(link_word w) noexcept {
  return (w & flag_mask) != 0;
}

[[nodiscard]] constexpr bool is_marked_or_flagged(link_word w) noexcept {
  return (w & aux_mask) != 0;
}

[[nodiscard]] constexpr link_word get_ref(link_word w) noexcept {
  return w & ~aux_mask;
}

[[nodiscard]] constexpr link_word with_mark(link_word w) noexcept {
  return w | mark_mask;
}

[[nodiscard]] constexpr link_word with_flag(link_word w) noexcept {
  return w | flag_mask;
}

template <typename T>
[[nodiscard]] inline link_word to_link(const T *p) noexcept {
  return reinterpret_cast<link_word>(p);
}

template <typename T>
[[nodiscard]] inline T *link_target(link_word w) noexcept {
  return reinterpret_cast<T *>(get_ref(w));
}

}  // namespace rqmap
