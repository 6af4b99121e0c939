#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "rqmap/map.hpp"
#include "rqmap/verify/oracle.hpp"
#include "rqmap/verify/probe.hpp"
#include "rqmap/verify/test_hooks.hpp"

namespace {

using namespace rqmap;

template <typename Map>
class ListOps : public ::testing::Test {};

using MapTypes = ::testing::Types<list_map, indexed_map>;
TYPED_TEST_SUITE(ListOps, MapTypes);

TYPED_TEST(ListOps, FindOnEmptyListReturnsHeadAndTail) {
  TypeParam m;
  const auto w = m.find_window(7);
  EXPECT_EQ(w.pred, m.head_node());
  EXPECT_EQ(w.curr, m.original_tail());
}

TYPED_TEST(ListOps, FindExactHit) {
  TypeParam m;
  m.insert(5, 50);
  const auto w = m.find_window(5);
  EXPECT_EQ(w.pred, m.head_node());
  EXPECT_EQ(w.curr->key.load(), 5);
  EXPECT_EQ(w.curr->value.load(), 50u);
}

TYPED_TEST(ListOps, InsertIntoEmptyThenContains) {
  TypeParam m;
  EXPECT_EQ(m.insert(5, 11), no_value);
  EXPECT_EQ(m.contains(5), 11u);
}

TYPED_TEST(ListOps, InsertExistingReturnsOldValueAndKeepsIt) {
  TypeParam m;
  EXPECT_EQ(m.insert(5, 11), no_value);
  EXPECT_EQ(m.insert(5, 22), 11u);
  EXPECT_EQ(m.contains(5), 11u);
}

TYPED_TEST(ListOps, RemoveAbsentReturnsNoValue) {
  TypeParam m;
  EXPECT_EQ(m.remove(5), no_value);
}

TYPED_TEST(ListOps, SingleElementLifecycle) {
  TypeParam m;
  m.insert(5, 11);
  EXPECT_EQ(m.remove(5), 11u);
  EXPECT_EQ(m.contains(5), no_value);
  EXPECT_EQ(m.remove(5), no_value);
  EXPECT_EQ(m.insert(5, 12), no_value);
  EXPECT_EQ(m.contains(5), 12u);
}

TYPED_TEST(ListOps, ContainsOnEmptyAndSingleton) {
  TypeParam m;
  EXPECT_EQ(m.contains(5), no_value);
  m.insert(5, 9);
  EXPECT_EQ(m.contains(5), 9u);
  EXPECT_EQ(m.contains(4), no_value);
  EXPECT_EQ(m.contains(6), no_value);
}

TYPED_TEST(ListOps, RangeQueryExamples) {
  TypeParam m;
  EXPECT_EQ(m.range_query(1, 100).size(), 0u);
  m.insert(1, 10);
  m.insert(3, 30);
  m.insert(5, 50);
  std::vector<entry> out{{99, 99}};
  EXPECT_EQ(m.range_query(2, 5, out), 2u);
  EXPECT_EQ(out, (std::vector<entry>{{3, 30}, {5, 50}}));
  EXPECT_EQ(m.range_query(5, 5), (std::vector<entry>{{5, 50}}));
  EXPECT_EQ(m.range_query(6, 9).size(), 0u);
}

TYPED_TEST(ListOps, RangeQueryRejectsInvertedBounds) {
  TypeParam m;
  EXPECT_THROW((void)m.range_query(5, 4), std::invalid_argument);
}

TYPED_TEST(ListOps, ReservedKeysAndValuesRejected) {
  TypeParam m;
  EXPECT_THROW(m.insert(key_min, 1), std::invalid_argument);
  EXPECT_THROW(m.insert(key_max, 1), std::invalid_argument);
  EXPECT_THROW(m.insert(1, no_value), std::invalid_argument);
  EXPECT_THROW(m.contains(key_max), std::invalid_argument);
  EXPECT_THROW(m.remove(key_min), std::invalid_argument);
  EXPECT_EQ(m.insert(key_min + 1, 1), no_value);
  EXPECT_EQ(m.insert(key_max - 1, 2), no_value);
  EXPECT_EQ(m.range_query(key_min + 1, key_max - 1).size(), 2u);
}

TYPED_TEST(ListOps, ThousandRandomInsertsMatchOracle) {
  TypeParam m;
  verify::oracle_map oracle;
  std::mt19937_64 rng{42};
  std::uniform_int_distribution<key_type> key{1, 2000};
  for (value_type i = 1; i <= 1000; ++i) {
    const auto k = key(rng);
    ASSERT_EQ(m.insert(k, i), oracle.insert(k, i));
  }
  EXPECT_EQ(m.range_query(1, 2000), oracle.range_query(1, 2000));
}

TYPED_TEST(ListOps, FiveHundredMixedUpdatesThenContainsSweep) {
  TypeParam m;
  verify::oracle_map oracle;
  std::mt19937_64 rng{7};
  std::uniform_int_distribution<key_type> key{1, 100};
  for (value_type i = 1; i <= 500; ++i) {
    const auto k = key(rng);
    if (rng() % 2 == 0)
      ASSERT_EQ(m.insert(k, i), oracle.insert(k, i));
    else
      ASSERT_EQ(m.remove(k), oracle.remove(k));
  }
  for (key_type k = 1; k <= 100; ++k) EXPECT_EQ(m.contains(k), oracle.contains(k)) << k;
  EXPECT_TRUE(verify::probe_structure(m).ok());
}

TYPED_TEST(ListOps, RacingRemovesExactlyOneWins) {
  for (int trial = 0; trial < 200; ++trial) {
    TypeParam m;
    m.insert(5, 77);
    std::atomic<int> go{0};
    value_type r[2]{};
    std::vector<std::thread> ts;
    for (int t = 0; t < 2; ++t)
      ts.emplace_back([&, t] {
        go.fetch_add(1);
        while (go.load() < 2) std::this_thread::yield();
        r[t] = m.remove(5);
      });
    for (auto &t : ts) t.join();
    ASSERT_TRUE((r[0] == 77 && r[1] == no_value) || (r[0] == no_value && r[1] == 77))
        << r[0] << " " << r[1];
    ASSERT_EQ(m.contains(5), no_value);
  }
}

TYPED_TEST(ListOps, RemovedNodesAreUnlinked) {
  TypeParam m;
  for (key_type k = 1; k <= 20; ++k) m.insert(k, static_cast<value_type>(k));
  for (key_type k = 2; k <= 20; k += 2) m.remove(k);
  const auto rep = verify::probe_structure(m);
  ASSERT_TRUE(rep.ok());
  ASSERT_EQ(rep.logical.size(), 10u);
  for (const auto &e : rep.logical) EXPECT_EQ(e.key % 2, 1);
}

TEST(ListOps, FreshListPassesProbe) {
  list_map m;
  const auto rep = verify::probe_structure(m);
  EXPECT_TRUE(rep.ok());
  EXPECT_TRUE(rep.logical.empty());
}

TEST(ListOps, CorruptedSnapshotFailsSortedness) {
  list_map m;
  for (key_type k : {1, 2, 3}) m.insert(k, static_cast<value_type>(k));
  auto snap = verify::take_snapshot(m);
  ASSERT_TRUE(verify::check_snapshot(snap).ok());
  std::swap(snap.path[1].key, snap.path[2].key);
  const auto rep = verify::check_snapshot(snap);
  ASSERT_FALSE(rep.ok());
  EXPECT_NE(rep.violations.front().find("strictly increasing"), std::string::npos);
}

// A range query must not see a node published after its timestamp, even
// though that node is reachable by the time the traversal gets there.
TEST(ListOps, RangeQueryIgnoresNodesNewerThanItsTimestamp) {
  verify::hook_state state;
  using map_t = versioned_list<no_index, verify::test_hooks>;
  map_t m{{}, verify::test_hooks{&state}};
  m.insert(10, 1);
  m.insert(30, 3);
  bool fired = false;
  state.on_point = [&](probe_point p) {
    if (p != probe_point::range_after_clock || fired) return;
    fired = true;
    m.insert(20, 2);
    m.remove(30);
  };
  const auto out = m.range_query(1, 100);
  ASSERT_TRUE(fired);
  EXPECT_EQ(out, (std::vector<entry>{{10, 1}, {30, 3}}));
  EXPECT_EQ(m.range_query(1, 100), (std::vector<entry>{{10, 1}, {20, 2}}));
}

}  // namespace
