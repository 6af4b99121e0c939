#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <random>
#include <thread>
#include <vector>

#include "rqmap/map.hpp"
#include "rqmap/verify/probe.hpp"
#include "rqmap/verify/stub_indexes.hpp"

namespace {

using namespace rqmap;

struct detached_node {
  list_node n;
  detached_node(key_type k, epoch_type birth) {
    n.begin_lifetime(birth);
    n.key.store(k);
  }
};

TEST(SkiplistIndex, EmptyIndexHasNoCandidate) {
  skiplist_index idx;
  EXPECT_EQ(idx.find_pred(10), nullptr);
}

TEST(SkiplistIndex, FindPredReturnsLargestSmallerKey) {
  skiplist_index idx;
  detached_node a{3, 1}, b{9, 1}, c{20, 1};
  idx.insert(3, &a.n, 1);
  idx.insert(9, &b.n, 1);
  idx.insert(20, &c.n, 1);
  EXPECT_EQ(idx.find_pred(15), &b.n);
  EXPECT_EQ(idx.find_pred(9), &a.n);
  EXPECT_EQ(idx.find_pred(21), &c.n);
  EXPECT_EQ(idx.find_pred(3), nullptr);
}

TEST(SkiplistIndex, StrictBoundMeansNoCandidate) {
  skiplist_index idx;
  detached_node a{3, 1};
  idx.insert(3, &a.n, 1);
  EXPECT_EQ(idx.find_pred(3), nullptr);
}

TEST(SkiplistIndex, FindPredMatchesBruteForce) {
  skiplist_index idx;
  std::mt19937_64 rng{5};
  std::vector<std::unique_ptr<detached_node>> nodes;
  std::map<key_type, list_node *> model;
  for (int i = 0; i < 2000; ++i) {
    const key_type k = static_cast<key_type>(rng() % 500) + 1;
    if (rng() % 3 == 0 && model.count(k)) {
      idx.remove(k, model[k]);
      model.erase(k);
    } else if (!model.count(k)) {
      nodes.push_back(std::make_unique<detached_node>(k, 1));
      idx.insert(k, &nodes.back()->n, 1);
      model[k] = &nodes.back()->n;
    }
  }
  EXPECT_EQ(idx.size(), model.size());
  for (key_type q = 1; q <= 502; ++q) {
    auto it = model.lower_bound(q);
    list_node *want = it == model.begin() ? nullptr : std::prev(it)->second;
    ASSERT_EQ(idx.find_pred(q), want) << q;
  }
}

TEST(SkiplistIndex, StaleUpdateIsRejected) {
  skiplist_index idx;
  detached_node older{57, 3}, newer{57, 5};
  idx.insert(57, &newer.n, 5);
  idx.update(57, &older.n, 3);
  EXPECT_EQ(idx.find_pred(58), &newer.n);
}

TEST(SkiplistIndex, UpdateToRecycledNodeIsRejected) {
  skiplist_index idx;
  detached_node first{57, 2}, recycled{57, 4};
  idx.insert(57, &first.n, 2);
  idx.update(57, &recycled.n, 3);  // slot now carries birth 4
  EXPECT_EQ(idx.find_pred(58), &first.n);
}

TEST(SkiplistIndex, RemoveOnlyDropsMatchingEntry) {
  skiplist_index idx;
  detached_node a{7, 1}, b{7, 2};
  idx.insert(7, &b.n, 2);
  idx.remove(7, &a.n);
  EXPECT_EQ(idx.find_pred(8), &b.n);
  idx.remove(7, &b.n);
  EXPECT_EQ(idx.find_pred(8), nullptr);
  EXPECT_EQ(idx.size(), 0u);
}

TEST(SkiplistIndex, ConcurrentInsertRemoveKeepsSkiplistConsistent) {
  skiplist_index idx;
  constexpr int per = 64;
  std::vector<std::unique_ptr<detached_node>> nodes;
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < per; ++i) nodes.push_back(std::make_unique<detached_node>(t * per + i + 1, 1));
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&, t] {
      for (int round = 0; round < 50; ++round)
        for (int i = 0; i < per; ++i) {
          auto *n = &nodes[t * per + i]->n;
          const key_type k = n->key.load();
          if (round % 2 == 0)
            idx.insert(k, n, 1);
          else
            idx.remove(k, n);
        }
    });
  for (auto &t : ts) t.join();
  EXPECT_EQ(idx.size(), 0u);
}

TEST(IndexedList, InsertIndexesAndTrimRepoints) {
  indexed_map m;
  for (key_type k : {9, 23, 48, 57, 84}) m.insert(k, static_cast<value_type>(k));
  list_node *n9 = m.find_window(9).curr;
  list_node *n23 = m.find_window(23).curr;
  list_node *n48 = m.find_window(48).curr;
  EXPECT_EQ(m.index().find_pred(10), n9);
  ASSERT_TRUE(m.mark(n23));
  ASSERT_TRUE(m.mark(n48));
  ASSERT_TRUE(m.trim(n9, n23));
  list_node *fresh57 = n9->next();
  EXPECT_EQ(m.index().find_pred(58), fresh57);
  EXPECT_EQ(m.index().find_pred(57), n9);
  EXPECT_EQ(m.index().find_pred(30), n9);
  EXPECT_EQ(m.index().size(), 3u);
}

TEST(IndexedList, AllStaleIndexFallsBackToHeadAfterFiveProbes) {
  versioned_list<verify::stale_index> m;
  m.insert(5, 50);
  m.insert(7, 70);
  m.index().reset_probes();
  const auto w = m.find_window(5);
  EXPECT_EQ(m.index().probes(), index_max_attempts);
  EXPECT_EQ(index_max_attempts, 5);
  EXPECT_EQ(w.pred, m.head_node());
  EXPECT_EQ(w.curr->key.load(), 5);
  m.index().reset_probes();
  EXPECT_EQ(m.contains(7), 70u);
  EXPECT_EQ(m.index().probes(), index_max_attempts);
}

// Candidate selection: marked candidates retry from their own key.
struct scripted_index {
  struct config {};
  static constexpr bool enabled = true;
  static inline std::vector<list_node *> answers;
  static inline std::vector<key_type> asked;

  scripted_index() = default;
  explicit scripted_index(config) {}

  list_node *find_pred(key_type k) {
    asked.push_back(k);
    if (answers.empty()) return nullptr;
    auto *n = answers.front();
    answers.erase(answers.begin());
    return n;
  }
  void insert(key_type, list_node *, epoch_type) {}
  void remove(key_type, list_node *) {}
  void update(key_type, list_node *, epoch_type) {}
};

TEST(IndexedList, MarkedCandidateRetriesBelowItsOwnKey) {
  versioned_list<scripted_index> m;
  for (key_type k : {10, 20, 30}) m.insert(k, static_cast<value_type>(k));
  list_node *n10 = m.find_window(10).curr;
  list_node *n20 = m.find_window(20).curr;
  ASSERT_TRUE(m.mark(n20));
  scripted_index::asked.clear();
  scripted_index::answers = {n20, n10};
  const auto w = m.find_window(30);
  EXPECT_EQ(scripted_index::asked, (std::vector<key_type>{30, 20}));
  EXPECT_EQ(w.pred, n10);
  EXPECT_EQ(w.curr->key.load(), 30);
}

TEST(IndexContract, DecrementProbeSequence) {
  std::vector<key_type> probes;
  auto miss = [&](key_type k) {
    probes.push_back(k);
    return std::pair<key_type, list_node *>{k, nullptr};
  };
  EXPECT_EQ(find_pred_by_decrement(1000, miss), nullptr);
  ASSERT_EQ(probes.size(), 5u);
  EXPECT_EQ(probes[0], 998);
  EXPECT_EQ(probes[1], 990);
  EXPECT_LT(probes[2], probes[1]);
  EXPECT_LT(probes[4], probes[3]);
}

TEST(IndexContract, DecrementAcceptsFirstSmallerHit) {
  detached_node n{5, 1};
  auto search = [&](key_type) { return std::pair<key_type, list_node *>{5, &n.n}; };
  EXPECT_EQ(find_pred_by_decrement(9, search), &n.n);
  EXPECT_EQ(find_pred_by_decrement(5, search), nullptr);
}

}  // namespace
