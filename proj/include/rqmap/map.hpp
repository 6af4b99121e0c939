#pragma once

/// \file
/// Umbrella header and the two ready-made map configurations.

#include "rqmap/common.hpp"
#include "rqmap/index/index_contract.hpp"
#include "rqmap/index/skiplist_index.hpp"
#include "rqmap/versioned_list.hpp"

namespace rqmap {

/// Every traversal starts at the head sentinel.
using list_map = versioned_list<no_index>;

/// Traversals start from a skip-list predecessor when one validates.
using indexed_map = versioned_list<skiplist_index>;

}  // namespace rqmap
