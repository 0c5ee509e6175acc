#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "metamiml/hmin.h"
#include "test_util.h"

using namespace metamiml;
using metamiml::testing::MakeBag;
using metamiml::testing::MakeRing;
using metamiml::testing::MakeSchema;

namespace {

const char* kToy =
    "HMIN v1\n"
    "# toy network\n"
    "T G BAG\n"
    "T D\n"
    "R GD G D\n"
    "L 5 five\n"
    "L 9 nine\n"
    "N 10 G\n"
    "N 20 D\n"
    "N 30 D\n"
    "E GD 10 20\n"
    "B 10 2 3\n"
    "1 2 3\n"
    "4 5 6.5\n"
    "Y 9\n";

LoadErrorCode CodeOf(const std::string& text) {
  try {
    ParseHmin(text);
  } catch (const HminLoadError& e) {
    return e.code();
  }
  FAIL("expected a load error");
  return LoadErrorCode::kIo;
}

}  // namespace

TEST_CASE("load a degenerate network with no edges") {
  const Hmin g = ParseHmin(
      "HMIN v1\nT G BAG\nN 1 G\nB 1 2 2\n0.5 1\n2 3\nY\n");
  CHECK(g.Edges().empty());
  CHECK(g.num_bags() == 1);
  CHECK(g.bag(0).instances.rows() == 2);
  CHECK(g.bag(0).labels.empty());
  CHECK(Validate(g).empty());
}

TEST_CASE("parse toy network") {
  const Hmin g = ParseHmin(kToy);
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_labels() == 2);
  const NodeId bag = *g.FindNode(10);
  CHECK(g.bag(bag).labels == std::vector<LabelIndex>{*g.FindLabel(9)});
  CHECK(g.bag(bag).instances(1, 2) == 6.5);
  CHECK(g.instance_dim() == 3);
  CHECK(Validate(g).empty());
}

TEST_CASE("save/load round trip is structural identity") {
  const Hmin g = MakeRing(5);
  const Hmin back = ParseHmin(SerializeHmin(g));
  CHECK(back == g);
  CHECK(SerializeHmin(back) == SerializeHmin(g));
  const Hmin again = ParseHmin(SerializeHmin(back));
  CHECK(again == g);
}

TEST_CASE("dimension mismatch cites the instance row") {
  const std::string text =
      "HMIN v1\nT G BAG\nN 1 G\nB 1 2 4\n1 2 3 4\n1 2 3\nY\n";
  try {
    ParseHmin(text);
    FAIL("expected a load error");
  } catch (const HminLoadError& e) {
    CHECK(e.code() == LoadErrorCode::kDimensionMismatch);
    CHECK(e.line() == 6);
  }
}

TEST_CASE("load errors are distinct") {
  CHECK(CodeOf("HMIN v2\nT G BAG\n") == LoadErrorCode::kMalformedHeader);
  CHECK(CodeOf("HMIN v1\nT G BAG\nT D\nR GD G D\nN 1 G\nE GD 1 2\nB 1 1 1\n0\nY\n") ==
        LoadErrorCode::kDanglingEdge);
  CHECK(CodeOf("HMIN v1\nT G BAG\nN 1 G\nN 1 G\n") == LoadErrorCode::kDuplicateNode);
  CHECK(CodeOf("HMIN v1\nT G BAG\nN 1 X\n") == LoadErrorCode::kUnknownType);
  CHECK(CodeOf("HMIN v1\nT G BAG\nN 1 G\nB 1 1 1\n0\nY 4\n") ==
        LoadErrorCode::kUnknownLabel);
  CHECK(CodeOf("HMIN v1\nT G BAG\nN 1 G\nB 1 1 1\nzz\nY\n") == LoadErrorCode::kSyntax);
}

TEST_CASE("neighbors_of_type on small graphs") {
  auto s = MakeSchema();
  const NodeId center = s.g.AddNode(1, s.G);
  const NodeId lone = s.g.AddNode(2, s.G);
  const NodeId a = s.g.AddNode(30, s.D);
  const NodeId b = s.g.AddNode(10, s.D);
  const NodeId c = s.g.AddNode(20, s.D);
  const NodeId m = s.g.AddNode(40, s.M);
  for (NodeId leaf : {a, b, c}) s.g.AddEdge(s.GD, center, leaf);
  s.g.AddEdge(s.GM, center, m);
  s.g.SetBag(MakeBag(center, 1, 2, {}));
  s.g.SetBag(MakeBag(lone, 1, 2, {}));
  s.g.Finalize();

  CHECK(s.g.NeighborsOfType(lone, s.D).empty());
  const auto leaves = s.g.NeighborsOfType(center, s.D);
  CHECK(std::vector<NodeId>(leaves.begin(), leaves.end()) ==
        std::vector<NodeId>{a, b, c});
  CHECK(std::is_sorted(leaves.begin(), leaves.end()));
  const auto ms = s.g.NeighborsOfType(center, s.M);
  CHECK(std::vector<NodeId>(ms.begin(), ms.end()) == std::vector<NodeId>{m});
  CHECK_THROWS_AS(s.g.NeighborsOfType(99, s.D), Error);
}

TEST_CASE("neighbors_of_type equals a brute-force scan of the edge list") {
  std::mt19937_64 rng(3);
  auto s = MakeSchema();
  const std::size_t n = 200;
  const TypeId types[3] = {s.G, s.D, s.M};
  std::vector<TypeId> type_of;
  for (std::size_t i = 0; i < n; ++i) {
    type_of.push_back(types[i % 3]);
    s.g.AddNode(5000 - i, type_of.back());
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (int e = 0; e < 600; ++e) {
    const NodeId u = static_cast<NodeId>(pick(rng));
    const NodeId v = static_cast<NodeId>(pick(rng));
    const TypeId tu = type_of[u], tv = type_of[v];
    if (tu == tv) continue;
    auto rel = [&](TypeId x, TypeId y) {
      if ((x == s.G && y == s.D) || (x == s.D && y == s.G)) return s.GD;
      if ((x == s.G && y == s.M) || (x == s.M && y == s.G)) return s.GM;
      return s.DM;
    };
    const bool forward = (rel(tu, tv) == s.GD && tu == s.G) ||
                         (rel(tu, tv) == s.GM && tu == s.G) ||
                         (rel(tu, tv) == s.DM && tu == s.D);
    if (forward) {
      s.g.AddEdge(rel(tu, tv), u, v);
    } else {
      s.g.AddEdge(rel(tu, tv), v, u);
    }
  }
  for (NodeId v = 0; v < n; ++v) {
    if (type_of[v] == s.G) s.g.SetBag(MakeBag(v, 1, 2, {}));
  }
  s.g.Finalize();

  const auto edges = s.g.Edges();
  for (NodeId v = 0; v < n; ++v) {
    for (TypeId t : types) {
      std::set<NodeId> expect;
      for (const TypedEdge& e : edges) {
        if (e.src == v && s.g.node_type(e.dst) == t) expect.insert(e.dst);
        if (e.dst == v && s.g.node_type(e.src) == t) expect.insert(e.src);
      }
      const auto got = s.g.NeighborsOfType(v, t);
      CHECK(std::vector<NodeId>(got.begin(), got.end()) ==
            std::vector<NodeId>(expect.begin(), expect.end()));
    }
  }
}

TEST_CASE("validate reports broken invariants without mutating") {
  CHECK(Validate(MakeRing(4)).empty());

  auto s = MakeSchema();
  const NodeId g1 = s.g.AddNode(1, s.G);
  s.g.AddNode(2, s.G);  // no Bag record
  s.g.SetBag(MakeBag(g1, 1, 2, {}));
  s.g.Finalize();
  const Hmin before = s.g;
  const auto findings = Validate(s.g);
  REQUIRE(findings.size() == 1);
  CHECK(findings[0].find("2") != std::string::npos);
  CHECK(s.g == before);

  auto t = MakeSchema();
  const NodeId b1 = t.g.AddNode(7, t.G);
  const NodeId d1 = t.g.AddNode(8, t.D);
  t.g.AddArc(b1, d1, t.GD);  // mirror missing under an undirected relation
  t.g.SetBag(MakeBag(b1, 1, 2, {}));
  t.g.Finalize();
  const auto asym = Validate(t.g);
  REQUIRE(asym.size() == 1);
  CHECK(asym[0].find("7") != std::string::npos);
  CHECK(asym[0].find("8") != std::string::npos);
}

TEST_CASE("schema lookups") {
  const Hmin g = MakeRing(3);
  CHECK(g.bag_type() == *g.FindType("G"));
  CHECK(g.Connects(*g.FindType("D"), *g.FindType("M")));
  CHECK_FALSE(g.Connects(*g.FindType("G"), *g.FindType("G")));
  CHECK_FALSE(g.FindType("Q").has_value());
  CHECK(g.BagNodes().size() == 3);
}
