#include "metamiml/episodes.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace metamiml {

namespace {

std::size_t SourceCount(double ratio, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

template <typename T>
void Partition(std::vector<T> items, double ratio, Rng& rng,
               std::vector<T>* source, std::vector<T>* target) {
  std::shuffle(items.begin(), items.end(), rng);
  const std::size_t k = SourceCount(ratio, items.size());
  source->assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k));
  target->assign(items.begin() + static_cast<std::ptrdiff_t>(k), items.end());
  std::sort(source->begin(), source->end());
  std::sort(target->begin(), target->end());
}

bool SameSide(const TaskSide& a, const TaskSide& b) {
  return a.direct == b.direct && a.path_contexts == b.path_contexts &&
         a.labels == b.labels && a.y.size() == b.y.size() && a.y == b.y;
}

TaskSide MakeSide(const Hmin& g, NodeId bag,
                  const std::vector<LabelIndex>& labels) {
  TaskSide side;
  side.labels = labels;
  side.y = Vector::Zero(static_cast<Eigen::Index>(labels.size()));
  const auto& truth = g.bag(bag).labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::binary_search(truth.begin(), truth.end(), labels[i])) {
      side.y[static_cast<Eigen::Index>(i)] = 1.0;
    }
  }
  return side;
}

}  // namespace

SplitSpec SplitSourceTarget(const Hmin& g, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    Fail(ErrorKind::kConfig, "split ratio must lie in (0, 1)");
  }
  if (g.num_labels() < 2) {
    Fail(ErrorKind::kData, "splitting needs at least 2 labels");
  }
  const std::vector<NodeId> bags = g.BagNodes();
  if (bags.size() < 2) Fail(ErrorKind::kData, "splitting needs at least 2 bags");

  SplitSpec split;
  split.ratio = ratio;
  split.seed = seed;
  std::vector<LabelIndex> labels(g.num_labels());
  std::iota(labels.begin(), labels.end(), 0);
  Rng label_rng(DeriveSeed(seed, 0x4c41'424cULL));
  Partition(labels, ratio, label_rng, &split.source_labels,
            &split.target_labels);
  Rng bag_rng(DeriveSeed(seed, 0x4241'4753ULL));
  Partition(bags, ratio, bag_rng, &split.source_bags, &split.target_bags);
  return split;
}

bool Task::operator==(const Task& other) const {
  return bag == other.bag && is_target == other.is_target &&
         no_neighbors == other.no_neighbors &&
         SameSide(support, other.support) && SameSide(query, other.query);
}

namespace {

Task BuildTaskFromWalks(const Hmin& g, const WalkCorpus& corpus, NodeId bag,
                        const SplitSpec& split, std::size_t query_labels,
                        std::uint64_t seed,
                        const std::vector<std::vector<const Walk*>>& walks) {
  if (bag >= g.num_nodes() || !g.FindBag(bag)) {
    Fail(ErrorKind::kInvalidArgument, "node " + std::to_string(bag) + " is not a bag");
  }
  const bool in_source = std::binary_search(split.source_bags.begin(),
                                            split.source_bags.end(), bag);
  const bool in_target = std::binary_search(split.target_bags.begin(),
                                            split.target_bags.end(), bag);
  if (!in_source && !in_target) {
    Fail(ErrorKind::kInvalidArgument,
         "bag " + std::to_string(g.external_id(bag)) + " is not in the split");
  }
  const auto& pool = in_source ? split.source_labels : split.target_labels;
  if (query_labels >= pool.size()) {
    Fail(ErrorKind::kConfig, "query_labels=" + std::to_string(query_labels) +
                                 " must be smaller than the label pool (" +
                                 std::to_string(pool.size()) + ")");
  }

  Task task;
  task.bag = bag;
  task.is_target = in_target;

  std::vector<LabelIndex> shuffled = pool;
  Rng rng(DeriveSeed(seed, g.external_id(bag), 0x5155'4552ULL));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  std::vector<LabelIndex> query(shuffled.begin(),
                                shuffled.begin() + static_cast<std::ptrdiff_t>(query_labels));
  std::vector<LabelIndex> support(shuffled.begin() + static_cast<std::ptrdiff_t>(query_labels),
                                  shuffled.end());
  std::sort(query.begin(), query.end());
  std::sort(support.begin(), support.end());
  task.support = MakeSide(g, bag, support);
  task.query = MakeSide(g, bag, query);

  const std::vector<NodeId> neighbors = g.Neighbors(bag);
  task.no_neighbors = neighbors.empty();
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    (i % 2 == 0 ? task.support.direct : task.query.direct)
        .push_back(neighbors[i]);
  }

  std::vector<std::vector<NodeId>> contexts(corpus.paths.size());
  for (std::size_t p = 0; p < corpus.paths.size(); ++p) {
    std::set<NodeId> reach;
    for (const Walk* w : walks[p]) {
      for (NodeId v : w->nodes) {
        if (v != bag) reach.insert(v);
      }
    }
    contexts[p].assign(reach.begin(), reach.end());
  }
  task.support.path_contexts = contexts;
  task.query.path_contexts = std::move(contexts);
  return task;
}

std::vector<std::vector<const Walk*>> WalksOf(const WalkCorpus& corpus,
                                              NodeId bag) {
  std::vector<std::vector<const Walk*>> out(corpus.by_path.size());
  for (std::size_t p = 0; p < corpus.by_path.size(); ++p) {
    for (const Walk& w : corpus.by_path[p]) {
      if (w.start == bag) out[p].push_back(&w);
    }
  }
  return out;
}

}  // namespace

Task BuildTask(const Hmin& g, const WalkCorpus& corpus, NodeId bag,
               const SplitSpec& split, std::size_t query_labels,
               std::uint64_t seed) {
  return BuildTaskFromWalks(g, corpus, bag, split, query_labels, seed,
                            WalksOf(corpus, bag));
}

std::vector<Task> BuildTasks(const Hmin& g, const WalkCorpus& corpus,
                             const SplitSpec& split, bool target,
                             std::size_t query_labels, std::uint64_t seed,
                             int threads) {
  const auto& bags = target ? split.target_bags : split.source_bags;
  // Index walks by start node once.
  std::vector<std::vector<std::vector<const Walk*>>> index(g.num_nodes());
  for (std::size_t p = 0; p < corpus.by_path.size(); ++p) {
    for (const Walk& w : corpus.by_path[p]) {
      auto& slot = index.at(w.start);
      if (slot.empty()) slot.resize(corpus.by_path.size());
      slot[p].push_back(&w);
    }
  }
  std::vector<Task> tasks(bags.size());
  ParallelFor(bags.size(), threads, [&](std::size_t i) {
    auto walks = index[bags[i]];
    if (walks.empty()) walks.resize(corpus.by_path.size());
    tasks[i] = BuildTaskFromWalks(g, corpus, bags[i], split, query_labels,
                                  seed, walks);
  });
  return tasks;
}

std::string SerializeSplit(const SplitSpec& split, const Hmin& g) {
  std::ostringstream out;
  out << "SPLIT v1 ratio=" << FormatDouble(split.ratio)
      << " seed=" << split.seed << "\n";
  auto labels = [&](const char* tag, const std::vector<LabelIndex>& ls) {
    out << tag;
    for (LabelIndex l : ls) out << " " << g.labels()[l].id;
    out << "\n";
  };
  auto bags = [&](const char* tag, const std::vector<NodeId>& bs) {
    out << tag;
    for (NodeId b : bs) out << " " << g.external_id(b);
    out << "\n";
  };
  labels("SL", split.source_labels);
  labels("TL", split.target_labels);
  bags("SB", split.source_bags);
  bags("TB", split.target_bags);
  return out.str();
}

void SaveSplit(const SplitSpec& split, const Hmin& g,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeSplit(split, g);
}

SplitSpec ParseSplit(const std::string& text, const Hmin& g) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::istringstream header(line);
  std::string magic, version, f_ratio, f_seed;
  header >> magic >> version >> f_ratio >> f_seed;
  SplitSpec split;
  if (magic != "SPLIT" || version != "v1" || f_ratio.rfind("ratio=", 0) != 0 ||
      f_seed.rfind("seed=", 0) != 0 ||
      !ParseDouble(f_ratio.substr(6), &split.ratio) ||
      !ParseUint64(f_seed.substr(5), &split.seed)) {
    Fail(ErrorKind::kData, "split header: expected 'SPLIT v1 ratio=.. seed=..'");
  }
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string tag, tok;
    fields >> tag;
    if (tag.empty()) continue;
    std::vector<std::uint64_t> ids;
    while (fields >> tok) {
      std::uint64_t v = 0;
      if (!ParseUint64(tok, &v)) Fail(ErrorKind::kData, "split: bad id " + tok);
      ids.push_back(v);
    }
    if (tag == "SL" || tag == "TL") {
      auto& dst = tag == "SL" ? split.source_labels : split.target_labels;
      for (auto id : ids) {
        auto l = g.FindLabel(id);
        if (!l) Fail(ErrorKind::kData, "split: unknown label " + std::to_string(id));
        dst.push_back(*l);
      }
      std::sort(dst.begin(), dst.end());
    } else if (tag == "SB" || tag == "TB") {
      auto& dst = tag == "SB" ? split.source_bags : split.target_bags;
      for (auto id : ids) {
        auto v = g.FindNode(id);
        if (!v || !g.FindBag(*v)) {
          Fail(ErrorKind::kData, "split: unknown bag " + std::to_string(id));
        }
        dst.push_back(*v);
      }
      std::sort(dst.begin(), dst.end());
    } else {
      Fail(ErrorKind::kData, "split: unknown record '" + tag + "'");
    }
  }
  return split;
}

SplitSpec LoadSplit(const std::filesystem::path& path, const Hmin& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseSplit(buf.str(), g);
}

}  // namespace metamiml
