// Source/target splitting and per-bag task (support/query) construction.

#ifndef METAMIML_EPISODES_H_
#define METAMIML_EPISODES_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metamiml/common.h"
#include "metamiml/hmin.h"
#include "metamiml/walks.h"

namespace metamiml {

struct SplitSpec {
  std::vector<LabelIndex> source_labels;  // all sorted ascending
  std::vector<LabelIndex> target_labels;
  std::vector<NodeId> source_bags;
  std::vector<NodeId> target_bags;
  double ratio = 0.8;
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

// Uniform random partition of labels and of bags; round(ratio * n) items go
// to the source side, clamped so both sides are non-empty.
SplitSpec SplitSourceTarget(const Hmin& g, double ratio, std::uint64_t seed);

struct TaskSide {
  std::vector<NodeId> direct;                     // direct context nodes
  std::vector<std::vector<NodeId>> path_contexts;  // per meta-path
  std::vector<LabelIndex> labels;                  // active label subset
  Vector y;                                        // 0/1 over `labels`
};

struct Task {
  NodeId bag = 0;
  bool is_target = false;
  TaskSide support;
  TaskSide query;
  bool no_neighbors = false;  // emitted with empty direct context

  bool operator==(const Task& other) const;
};

// One task for `bag`. The label pool is the split side the bag belongs to;
// `query_labels` of them are drawn for the query set, the rest form the
// support set. Direct neighbours alternate support/query by ascending id.
Task BuildTask(const Hmin& g, const WalkCorpus& corpus, NodeId bag,
               const SplitSpec& split, std::size_t query_labels,
               std::uint64_t seed);

// Tasks for every bag of one side of the split, in ascending bag order.
std::vector<Task> BuildTasks(const Hmin& g, const WalkCorpus& corpus,
                             const SplitSpec& split, bool target,
                             std::size_t query_labels, std::uint64_t seed,
                             int threads = 1);

// Split file: `SPLIT v1 ratio=<r> seed=<s>`, then `SL`, `TL` (label ids)
// and `SB`, `TB` (bag node ids) lines.
void SaveSplit(const SplitSpec& split, const Hmin& g,
               const std::filesystem::path& path);
std::string SerializeSplit(const SplitSpec& split, const Hmin& g);
SplitSpec LoadSplit(const std::filesystem::path& path, const Hmin& g);
SplitSpec ParseSplit(const std::string& text, const Hmin& g);

}  // namespace metamiml

#endif  // METAMIML_EPISODES_H_
