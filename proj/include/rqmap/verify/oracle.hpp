#pragma once

/// \file
/// Sequential reference map with the same operation semantics as the list.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "rqmap/common.hpp"

namespace rqmap::verify {

class oracle_map {
 public:
  value_type insert(key_type key, value_type value) {
    const auto [it, inserted] = map_.try_emplace(key, value);
    return inserted ? no_value : it->second;
  }

  value_type remove(key_type key) {
    const auto it = map_.find(key);
    if (it == map_.end()) return no_value;
    const auto v = it->second;
    map_.erase(it);
    return v;
  }

  [[nodiscard]] value_type contains(key_type key) const {
    const auto it = map_.find(key);
    return it == map_.end() ? no_value : it->second;
  }

  std::size_t range_query(key_type low, key_type high, std::vector<entry> &out) const {
    if (low > high) throw std::invalid_argument("oracle: range_query with low > high");
    out.clear();
    for (auto it = map_.lower_bound(low); it != map_.end() && it->first <= high; ++it)
      out.push_back({it->first, it->second});
    return out.size();
  }

  [[nodiscard]] std::vector<entry> range_query(key_type low, key_type high) const {
    std::vector<entry> out;
    range_query(low, high, out);
    return out;
  }

  [[nodiscard]] std::size_t size() const noexcept { return map_.size(); }
  [[nodiscard]] const std::map<key_type, value_type> &contents() const noexcept { return map_; }

 private:
  std::map<key_type, value_type> map_;
};

}  // namespace rqmap::verify
