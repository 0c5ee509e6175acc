// Meta-path parsing and meta-path constrained random walks.

#ifndef METAMIML_WALKS_H_
#define METAMIML_WALKS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metamiml/common.h"
#include "metamiml/hmin.h"

namespace metamiml {

struct MetaPath {
  std::vector<TypeId> types;  // length >= 2, types.front() is the bag type
  std::string display;        // e.g. "G-D-G"

  // Type required at walk position `step` when the pattern is recycled:
  // 0, 1, ..., m-1, 1, ..., m-1, 1, ...
  TypeId TypeAt(std::size_t step) const;

  bool operator==(const MetaPath&) const = default;
};

// Parses a dash separated list of type names against the schema of `g`.
MetaPath ParseMetaPath(const std::string& text, const Hmin& g);

struct Walk {
  std::vector<NodeId> nodes;
  std::uint32_t path = 0;  // index into the corpus' meta-path list
  NodeId start = 0;

  bool operator==(const Walk&) const = default;
};

// Walk of at most `length` + 1 nodes starting at `start`; each step moves to a
// uniformly chosen neighbour of the required type and the walk stops early at
// a dead end.
Walk SampleWalk(const Hmin& g, NodeId start, const MetaPath& path,
                std::size_t length, Rng& rng, std::uint32_t path_index = 0);

struct WalkConfig {
  std::size_t walks_per_node = 10;  // w
  std::size_t walk_length = 40;     // l
  std::uint64_t seed = 0;
  int threads = 1;
};

struct WalkCorpus {
  std::vector<MetaPath> paths;
  // by_path[p] holds, for each bag node in ascending order, its w walks.
  std::vector<std::vector<Walk>> by_path;
  WalkConfig config;

  std::size_t num_walks() const;
  bool operator==(const WalkCorpus& other) const;
};

// Every (path, bag) pair draws from its own stream DeriveSeed(seed, bag,
// path), so the result does not depend on `config.threads`.
WalkCorpus GenerateCorpus(const Hmin& g, const std::vector<MetaPath>& paths,
                          const WalkConfig& config);

// Corpus file: header, one `M` line per meta-path, then one walk per line
// prefixed by `P<path_index>`. Node ids are the network's external ids.
void SaveCorpus(const WalkCorpus& corpus, const Hmin& g,
                const std::filesystem::path& path);
std::string SerializeCorpus(const WalkCorpus& corpus, const Hmin& g);
WalkCorpus LoadCorpus(const std::filesystem::path& path, const Hmin& g);
WalkCorpus ParseCorpus(const std::string& text, const Hmin& g);

}  // namespace metamiml

#endif  // METAMIML_WALKS_H_
