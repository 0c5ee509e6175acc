#include "metamiml/walks.h"

#include <fstream>
#include <sstream>

namespace metamiml {

TypeId MetaPath::TypeAt(std::size_t step) const {
  if (step == 0) return types.front();
  const std::size_t cycle = types.size() - 1;
  return types[1 + (step - 1) % cycle];
}

MetaPath ParseMetaPath(const std::string& text, const Hmin& g) {
  MetaPath path;
  path.display = text;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dash = text.find('-', pos);
    const std::string name = text.substr(pos, dash - pos);
    auto t = g.FindType(name);
    if (!t) {
      Fail(ErrorKind::kConfig,
           "meta-path '" + text + "': unknown type '" + name + "'");
    }
    path.types.push_back(*t);
    if (dash == std::string::npos) break;
    pos = dash + 1;
  }
  if (path.types.size() < 2) {
    Fail(ErrorKind::kConfig,
         "meta-path '" + text + "' needs at least two types");
  }
  if (path.types.front() != g.bag_type()) {
    Fail(ErrorKind::kConfig, "meta-path '" + text +
                                 "' must start at the bag type '" +
                                 g.type(g.bag_type()).name + "'");
  }
  for (std::size_t i = 0; i + 1 < path.types.size(); ++i) {
    if (!g.Connects(path.types[i], path.types[i + 1])) {
      Fail(ErrorKind::kConfig, "meta-path '" + text + "': no relation from '" +
                                   g.type(path.types[i]).name + "' to '" +
                                   g.type(path.types[i + 1]).name + "'");
    }
  }
  return path;
}

Walk SampleWalk(const Hmin& g, NodeId start, const MetaPath& path,
                std::size_t length, Rng& rng, std::uint32_t path_index) {
  if (start >= g.num_nodes() || g.node_type(start) != g.bag_type()) {
    Fail(ErrorKind::kInvalidArgument,
         "walk start " + std::to_string(start) + " is not a bag node");
  }
  Walk walk;
  walk.path = path_index;
  walk.start = start;
  walk.nodes.reserve(length + 1);
  walk.nodes.push_back(start);
  NodeId current = start;
  for (std::size_t step = 1; step <= length; ++step) {
    auto candidates = g.NeighborsOfType(current, path.TypeAt(step));
    if (candidates.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    current = candidates[pick(rng)];
    walk.nodes.push_back(current);
  }
  return walk;
}

std::size_t WalkCorpus::num_walks() const {
  std::size_t total = 0;
  for (const auto& walks : by_path) total += walks.size();
  return total;
}

bool WalkCorpus::operator==(const WalkCorpus& other) const {
  return paths == other.paths && by_path == other.by_path &&
         config.walks_per_node == other.config.walks_per_node &&
         config.walk_length == other.config.walk_length &&
         config.seed == other.config.seed;
}

WalkCorpus GenerateCorpus(const Hmin& g, const std::vector<MetaPath>& paths,
                          const WalkConfig& config) {
  if (paths.empty()) Fail(ErrorKind::kConfig, "no meta-paths given");
  const std::vector<NodeId> bags = g.NodesOfType(g.bag_type());
  WalkCorpus corpus;
  corpus.paths = paths;
  corpus.config = config;
  corpus.by_path.resize(paths.size());
  for (auto& walks : corpus.by_path) {
    walks.resize(bags.size() * config.walks_per_node);
  }
  const std::size_t jobs = paths.size() * bags.size();
  ParallelFor(jobs, config.threads, [&](std::size_t job) {
    const std::size_t p = job / bags.size();
    const std::size_t b = job % bags.size();
    Rng rng(DeriveSeed(config.seed, g.external_id(bags[b]), p));
    for (std::size_t k = 0; k < config.walks_per_node; ++k) {
      corpus.by_path[p][b * config.walks_per_node + k] =
          SampleWalk(g, bags[b], paths[p], config.walk_length, rng,
                     static_cast<std::uint32_t>(p));
    }
  });
  return corpus;
}

std::string SerializeCorpus(const WalkCorpus& corpus, const Hmin& g) {
  std::ostringstream out;
  out << "WALKS v1 paths=" << corpus.paths.size()
      << " w=" << corpus.config.walks_per_node
      << " l=" << corpus.config.walk_length << " seed=" << corpus.config.seed
      << "\n";
  for (std::size_t p = 0; p < corpus.paths.size(); ++p) {
    out << "M " << p << " " << corpus.paths[p].display << "\n";
  }
  for (std::size_t p = 0; p < corpus.by_path.size(); ++p) {
    for (const Walk& w : corpus.by_path[p]) {
      out << "P" << p;
      for (NodeId v : w.nodes) out << " " << g.external_id(v);
      out << "\n";
    }
  }
  return out.str();
}

void SaveCorpus(const WalkCorpus& corpus, const Hmin& g,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeCorpus(corpus, g);
}

namespace {

std::uint64_t HeaderField(const std::string& token, const std::string& key) {
  std::uint64_t v = 0;
  if (token.rfind(key + "=", 0) != 0 ||
      !ParseUint64(token.substr(key.size() + 1), &v)) {
    Fail(ErrorKind::kData, "corpus header: expected " + key + "=<n>");
  }
  return v;
}

}  // namespace

WalkCorpus ParseCorpus(const std::string& text, const Hmin& g) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) Fail(ErrorKind::kData, "empty corpus file");
  std::istringstream header(line);
  std::string magic, version, f_paths, f_w, f_l, f_seed;
  header >> magic >> version >> f_paths >> f_w >> f_l >> f_seed;
  if (magic != "WALKS" || version != "v1") {
    Fail(ErrorKind::kData, "corpus header: expected 'WALKS v1'");
  }
  WalkCorpus corpus;
  const std::size_t num_paths = HeaderField(f_paths, "paths");
  corpus.config.walks_per_node = HeaderField(f_w, "w");
  corpus.config.walk_length = HeaderField(f_l, "l");
  corpus.config.seed = HeaderField(f_seed, "seed");
  corpus.by_path.resize(num_paths);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string head;
    fields >> head;
    if (head == "M") {
      std::size_t index = 0;
      std::string display;
      fields >> index >> display;
      if (index != corpus.paths.size()) {
        Fail(ErrorKind::kData,
             "corpus line " + std::to_string(line_no) + ": meta-paths out of order");
      }
      corpus.paths.push_back(ParseMetaPath(display, g));
      continue;
    }
    std::uint64_t p = 0;
    if (head.size() < 2 || head[0] != 'P' || !ParseUint64(head.substr(1), &p) ||
        p >= num_paths) {
      Fail(ErrorKind::kData,
           "corpus line " + std::to_string(line_no) + ": bad path tag");
    }
    Walk walk;
    walk.path = static_cast<std::uint32_t>(p);
    std::string tok;
    while (fields >> tok) {
      std::uint64_t ext = 0;
      if (!ParseUint64(tok, &ext)) {
        Fail(ErrorKind::kData,
             "corpus line " + std::to_string(line_no) + ": bad node id");
      }
      auto v = g.FindNode(ext);
      if (!v) {
        Fail(ErrorKind::kData, "corpus line " + std::to_string(line_no) +
                                   ": unknown node " + tok);
      }
      walk.nodes.push_back(*v);
    }
    if (walk.nodes.empty()) {
      Fail(ErrorKind::kData,
           "corpus line " + std::to_string(line_no) + ": empty walk");
    }
    walk.start = walk.nodes.front();
    corpus.by_path[p].push_back(std::move(walk));
  }
  if (corpus.paths.size() != num_paths) {
    Fail(ErrorKind::kData, "corpus header declares " +
                               std::to_string(num_paths) +
                               " meta-paths but lists " +
                               std::to_string(corpus.paths.size()));
  }
  return corpus;
}

WalkCorpus LoadCorpus(const std::filesystem::path& path, const Hmin& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCorpus(buf.str(), g);
}

}  // namespace metamiml
