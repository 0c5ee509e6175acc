#include <algorithm>
#include <set>

#include "doctest.h"
#include "metamiml/episodes.h"
#include "metamiml/walks.h"
#include "test_util.h"

using namespace metamiml;
using metamiml::testing::MakeBag;
using metamiml::testing::MakeRing;
using metamiml::testing::MakeSchema;

namespace {

// `bags` bags over `labels` labels; bag i carries labels i mod q and
// (i + 1) mod q, and links to four D nodes.
Hmin LabelHeavy(std::size_t bags, std::size_t labels) {
  auto s = MakeSchema(labels);
  std::vector<NodeId> ds;
  for (std::size_t i = 0; i < 8; ++i) ds.push_back(s.g.AddNode(9000 + i, s.D));
  for (std::size_t i = 0; i < bags; ++i) {
    const NodeId b = s.g.AddNode(1 + i, s.G);
    for (std::size_t j = 0; j < 4; ++j) s.g.AddEdge(s.GD, b, ds[(i + j) % ds.size()]);
    std::vector<LabelIndex> ls = {static_cast<LabelIndex>(i % labels),
                                  static_cast<LabelIndex>((i + 1) % labels)};
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    s.g.SetBag(MakeBag(b, 2, 2, ls));
  }
  s.g.Finalize();
  return std::move(s.g);
}

WalkCorpus Walks(const Hmin& g) {
  WalkConfig wc;
  wc.walks_per_node = 3;
  wc.walk_length = 6;
  wc.seed = 4;
  return GenerateCorpus(g, {ParseMetaPath("G-D-G", g)}, wc);
}

template <typename T>
bool Disjoint(const std::vector<T>& a, const std::vector<T>& b) {
  std::set<T> sa(a.begin(), a.end());
  for (const T& x : b) {
    if (sa.count(x)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("split sizes and partition") {
  const Hmin g = LabelHeavy(10, 100);
  const SplitSpec s = SplitSourceTarget(g, 0.8, 3);
  CHECK(s.source_labels.size() == 80);
  CHECK(s.target_labels.size() == 20);
  CHECK(s.source_bags.size() == 8);
  CHECK(s.target_bags.size() == 2);
  CHECK(Disjoint(s.source_labels, s.target_labels));
  CHECK(Disjoint(s.source_bags, s.target_bags));
  std::set<LabelIndex> all(s.source_labels.begin(), s.source_labels.end());
  all.insert(s.target_labels.begin(), s.target_labels.end());
  CHECK(all.size() == 100);
  std::set<NodeId> bags(s.source_bags.begin(), s.source_bags.end());
  bags.insert(s.target_bags.begin(), s.target_bags.end());
  CHECK(std::vector<NodeId>(bags.begin(), bags.end()) == g.BagNodes());
  CHECK(std::is_sorted(s.source_labels.begin(), s.source_labels.end()));
  CHECK(s == SplitSourceTarget(g, 0.8, 3));
}

TEST_CASE("split rejects degenerate inputs") {
  CHECK_THROWS_AS(SplitSourceTarget(LabelHeavy(10, 1), 0.8, 1), Error);
  CHECK_THROWS_AS(SplitSourceTarget(LabelHeavy(1, 5), 0.8, 1), Error);
  CHECK_THROWS_AS(SplitSourceTarget(LabelHeavy(5, 5), 1.0, 1), Error);
  CHECK_THROWS_AS(SplitSourceTarget(LabelHeavy(5, 5), 0.0, 1), Error);
  // Both sides stay non-empty even when rounding would empty one.
  const SplitSpec s = SplitSourceTarget(LabelHeavy(3, 2), 0.9, 1);
  CHECK(s.source_labels.size() == 1);
  CHECK(s.target_labels.size() == 1);
}

TEST_CASE("labels land in the source side at the split ratio") {
  const Hmin g = LabelHeavy(4, 10);
  std::vector<int> count(10, 0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (LabelIndex l : SplitSourceTarget(g, 0.8, seed).source_labels) ++count[l];
  }
  for (int c : count) CHECK(std::abs(c - 8) <= 2);

  std::vector<int> many(10, 0);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    for (LabelIndex l : SplitSourceTarget(g, 0.8, 100 + seed).source_labels) ++many[l];
  }
  for (int c : many) CHECK(std::abs(c / 2000.0 - 0.8) < 0.03);
}

TEST_CASE("task with 25 pool labels and 5 query labels") {
  const Hmin g = LabelHeavy(6, 40);
  const WalkCorpus corpus = Walks(g);
  SplitSpec split;
  for (LabelIndex l = 0; l < 15; ++l) split.source_labels.push_back(l);
  for (LabelIndex l = 15; l < 40; ++l) split.target_labels.push_back(l);
  const auto bags = g.BagNodes();
  split.source_bags.assign(bags.begin(), bags.begin() + 3);
  split.target_bags.assign(bags.begin() + 3, bags.end());

  const NodeId bag = split.target_bags[0];
  const Task t = BuildTask(g, corpus, bag, split, 5, 11);
  CHECK(t.is_target);
  CHECK(t.query.labels.size() == 5);
  CHECK(t.support.labels.size() == 20);
  CHECK(Disjoint(t.query.labels, t.support.labels));
  std::set<LabelIndex> pool(t.query.labels.begin(), t.query.labels.end());
  pool.insert(t.support.labels.begin(), t.support.labels.end());
  CHECK(std::vector<LabelIndex>(pool.begin(), pool.end()) == split.target_labels);

  const auto& truth = g.bag(bag).labels;
  for (const TaskSide* side : {&t.support, &t.query}) {
    REQUIRE(side->y.size() == static_cast<Eigen::Index>(side->labels.size()));
    for (std::size_t j = 0; j < side->labels.size(); ++j) {
      const bool has = std::binary_search(truth.begin(), truth.end(), side->labels[j]);
      CHECK(side->y[static_cast<Eigen::Index>(j)] == (has ? 1.0 : 0.0));
    }
  }

  CHECK(t == BuildTask(g, corpus, bag, split, 5, 11));
  CHECK_THROWS_AS(BuildTask(g, corpus, bag, split, 25, 11), Error);
  CHECK_THROWS_AS(BuildTask(g, corpus, 9999, split, 5, 11), Error);
}

TEST_CASE("direct neighbours split disjointly") {
  const Hmin g = LabelHeavy(6, 6);
  const WalkCorpus corpus = Walks(g);
  const SplitSpec split = SplitSourceTarget(g, 0.5, 2);
  for (NodeId bag : g.BagNodes()) {
    const Task t = BuildTask(g, corpus, bag, split, 1, 5);
    CHECK(Disjoint(t.support.direct, t.query.direct));
    std::vector<NodeId> all = t.support.direct;
    all.insert(all.end(), t.query.direct.begin(), t.query.direct.end());
    std::sort(all.begin(), all.end());
    CHECK(all.size() == 4);
    CHECK(all == g.Neighbors(bag));
    CHECK_FALSE(t.no_neighbors);
  }
}

TEST_CASE("isolated bag is flagged") {
  auto s = MakeSchema(2);
  const NodeId a = s.g.AddNode(1, s.G);
  const NodeId b = s.g.AddNode(2, s.G);
  const NodeId d = s.g.AddNode(3, s.D);
  s.g.AddEdge(s.GD, a, d);
  s.g.SetBag(MakeBag(a, 1, 2, {0}));
  s.g.SetBag(MakeBag(b, 1, 2, {1}));
  s.g.Finalize();
  const WalkCorpus corpus = Walks(s.g);
  SplitSpec split;
  split.source_labels = {0};
  split.target_labels = {1};
  split.source_bags = {a, b};
  split.target_bags = {};
  // Pool of one label cannot give a query label and keep a support label.
  CHECK_THROWS_AS(BuildTask(s.g, corpus, b, split, 1, 1), Error);
  split.source_labels = {0, 1};
  split.target_labels = {};
  const Task t = BuildTask(s.g, corpus, b, split, 1, 1);
  CHECK(t.no_neighbors);
  CHECK(t.support.direct.empty());
  CHECK(t.query.direct.empty());
}

TEST_CASE("path contexts come from the bag's walks") {
  const Hmin g = MakeRing(6);
  const WalkCorpus corpus = Walks(g);
  const SplitSpec split = SplitSourceTarget(g, 0.5, 1);
  const auto tasks = BuildTasks(g, corpus, split, false, 1, 3);
  REQUIRE(tasks.size() == split.source_bags.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    CHECK(t.bag == split.source_bags[i]);
    std::set<NodeId> seen;
    for (const Walk& w : corpus.by_path[0]) {
      if (w.start == t.bag) seen.insert(w.nodes.begin(), w.nodes.end());
    }
    seen.erase(t.bag);
    REQUIRE(t.support.path_contexts.size() == 1);
    CHECK(t.support.path_contexts[0] ==
          std::vector<NodeId>(seen.begin(), seen.end()));
  }
  CHECK(BuildTasks(g, corpus, split, false, 1, 3, 4) == tasks);
}

TEST_CASE("split file round trip") {
  const Hmin g = LabelHeavy(7, 9);
  const SplitSpec s = SplitSourceTarget(g, 0.7, 12);
  CHECK(ParseSplit(SerializeSplit(s, g), g) == s);
  CHECK_THROWS_AS(ParseSplit("SPLIT v9\n", g), Error);
}
