#include "metamiml/hmin.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace metamiml {

TypeId Hmin::AddType(const std::string& name, bool is_bag) {
  types_.push_back({name, is_bag});
  finalized_ = false;
  return static_cast<TypeId>(types_.size() - 1);
}

RelationId Hmin::AddRelation(const std::string& name, TypeId a, TypeId b,
                             bool directed) {
  if (a >= types_.size() || b >= types_.size()) {
    Fail(ErrorKind::kInvalidArgument, "relation '" + name +
                                          "' references an undeclared type");
  }
  relations_.push_back({name, a, b, directed});
  finalized_ = false;
  return static_cast<RelationId>(relations_.size() - 1);
}

LabelIndex Hmin::AddLabel(std::uint64_t id, const std::string& name) {
  labels_.push_back({id, name});
  return static_cast<LabelIndex>(labels_.size() - 1);
}

NodeId Hmin::AddNode(std::uint64_t external_id, TypeId type) {
  if (type >= types_.size()) {
    Fail(ErrorKind::kInvalidArgument, "node type out of range");
  }
  if (by_external_.count(external_id)) {
    Fail(ErrorKind::kInvalidArgument,
         "duplicate node id " + std::to_string(external_id));
  }
  const NodeId id = static_cast<NodeId>(node_type_.size());
  node_type_.push_back(type);
  external_ids_.push_back(external_id);
  by_external_.emplace(external_id, id);
  adjacency_.emplace_back();
  finalized_ = false;
  return id;
}

void Hmin::AddEdge(RelationId relation, NodeId src, NodeId dst) {
  AddArc(src, dst, relation);
  if (!relations_.at(relation).directed && src != dst) {
    AddArc(dst, src, relation);
  }
}

void Hmin::AddArc(NodeId from, NodeId to, RelationId relation) {
  if (from >= adjacency_.size()) {
    Fail(ErrorKind::kInvalidArgument, "arc source out of range");
  }
  adjacency_[from].push_back({to, relation});
  finalized_ = false;
}

void Hmin::SetBag(Bag bag) {
  if (bag.node >= node_type_.size()) {
    Fail(ErrorKind::kInvalidArgument, "bag node out of range");
  }
  std::sort(bag.labels.begin(), bag.labels.end());
  bag.labels.erase(std::unique(bag.labels.begin(), bag.labels.end()),
                   bag.labels.end());
  const NodeId node = bag.node;
  bags_[node] = std::move(bag);
}

void Hmin::Finalize() {
  const std::size_t nt = types_.size();
  const std::size_t n = node_type_.size();
  typed_offsets_.assign(n * nt + 1, 0);
  typed_neighbors_.clear();
  for (NodeId v = 0; v < n; ++v) {
    auto& arcs = adjacency_[v];
    std::sort(arcs.begin(), arcs.end());
    std::vector<std::vector<NodeId>> per_type(nt);
    for (const Arc& a : arcs) {
      // Dangling arcs are reported by Validate; skip them here.
      if (a.neighbor >= n) continue;
      auto& bucket = per_type[node_type_[a.neighbor]];
      if (bucket.empty() || bucket.back() != a.neighbor) {
        bucket.push_back(a.neighbor);
      }
    }
    for (std::size_t t = 0; t < nt; ++t) {
      typed_offsets_[v * nt + t] = typed_neighbors_.size();
      typed_neighbors_.insert(typed_neighbors_.end(), per_type[t].begin(),
                              per_type[t].end());
    }
  }
  typed_offsets_[n * nt] = typed_neighbors_.size();
  finalized_ = true;
}

std::optional<TypeId> Hmin::FindType(const std::string& name) const {
  for (TypeId t = 0; t < types_.size(); ++t) {
    if (types_[t].name == name) return t;
  }
  return std::nullopt;
}

TypeId Hmin::bag_type() const {
  std::optional<TypeId> found;
  for (TypeId t = 0; t < types_.size(); ++t) {
    if (!types_[t].is_bag) continue;
    if (found) Fail(ErrorKind::kData, "more than one bag type declared");
    found = t;
  }
  if (!found) Fail(ErrorKind::kData, "no bag type declared");
  return *found;
}

std::optional<RelationId> Hmin::FindRelation(const std::string& name) const {
  for (RelationId r = 0; r < relations_.size(); ++r) {
    if (relations_[r].name == name) return r;
  }
  return std::nullopt;
}

bool Hmin::Connects(TypeId from, TypeId to) const {
  for (const Relation& r : relations_) {
    if (r.type_a == from && r.type_b == to) return true;
    if (!r.directed && r.type_b == from && r.type_a == to) return true;
  }
  return false;
}

std::optional<LabelIndex> Hmin::FindLabel(std::uint64_t id) const {
  for (LabelIndex i = 0; i < labels_.size(); ++i) {
    if (labels_[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<NodeId> Hmin::FindNode(std::uint64_t external_id) const {
  auto it = by_external_.find(external_id);
  if (it == by_external_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> Hmin::NodesOfType(TypeId t) const {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < node_type_.size(); ++v) {
    if (node_type_[v] == t) out.push_back(v);
  }
  return out;
}

std::span<const Arc> Hmin::arcs(NodeId v) const {
  if (v >= adjacency_.size()) {
    Fail(ErrorKind::kInvalidArgument, "unknown node " + std::to_string(v));
  }
  return adjacency_[v];
}

std::size_t Hmin::num_arcs() const {
  std::size_t total = 0;
  for (const auto& a : adjacency_) total += a.size();
  return total;
}

std::span<const NodeId> Hmin::NeighborsOfType(NodeId node, TypeId t) const {
  if (node >= node_type_.size()) {
    Fail(ErrorKind::kInvalidArgument, "unknown node " + std::to_string(node));
  }
  if (t >= types_.size()) {
    Fail(ErrorKind::kInvalidArgument, "unknown type " + std::to_string(t));
  }
  if (!finalized_) {
    Fail(ErrorKind::kInvalidArgument, "network queried before Finalize()");
  }
  const std::size_t slot = node * types_.size() + t;
  const std::size_t begin = typed_offsets_[slot];
  const std::size_t end = typed_offsets_[slot + 1];
  return {typed_neighbors_.data() + begin, end - begin};
}

std::vector<NodeId> Hmin::Neighbors(NodeId node) const {
  std::vector<NodeId> out;
  for (const Arc& a : arcs(node)) out.push_back(a.neighbor);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<TypedEdge> Hmin::Edges() const {
  std::vector<TypedEdge> out;
  for (NodeId v = 0; v < adjacency_.size(); ++v) {
    for (const Arc& a : adjacency_[v]) {
      const Relation& rel = relations_.at(a.relation);
      if (!rel.directed && a.neighbor < v) continue;
      TypedEdge e{v, a.neighbor, a.relation};
      // Keep the declared (type_a, type_b) orientation in the edge list.
      if (!rel.directed && a.neighbor < node_type_.size() &&
          node_type_[e.src] != rel.type_a && node_type_[e.dst] == rel.type_a) {
        std::swap(e.src, e.dst);
      }
      out.push_back(e);
    }
  }
  return out;
}

const Bag* Hmin::FindBag(NodeId node) const {
  auto it = bags_.find(node);
  return it == bags_.end() ? nullptr : &it->second;
}

const Bag& Hmin::bag(NodeId node) const {
  const Bag* b = FindBag(node);
  if (b == nullptr) {
    Fail(ErrorKind::kInvalidArgument,
         "node " + std::to_string(node) + " has no bag");
  }
  return *b;
}

std::vector<NodeId> Hmin::BagNodes() const {
  std::vector<NodeId> out;
  out.reserve(bags_.size());
  for (const auto& [node, bag] : bags_) out.push_back(node);
  return out;
}

std::size_t Hmin::instance_dim() const {
  if (bags_.empty()) return 0;
  return static_cast<std::size_t>(bags_.begin()->second.instances.cols());
}

bool Hmin::operator==(const Hmin& other) const {
  if (types_ != other.types_ || relations_ != other.relations_ ||
      labels_ != other.labels_ || node_type_ != other.node_type_ ||
      external_ids_ != other.external_ids_ || bags_ != other.bags_) {
    return false;
  }
  for (std::size_t v = 0; v < adjacency_.size(); ++v) {
    auto a = adjacency_[v];
    auto b = other.adjacency_[v];
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// HMIN v1 text format.

const char* ToString(LoadErrorCode code) {
  switch (code) {
    case LoadErrorCode::kIo: return "io";
    case LoadErrorCode::kMalformedHeader: return "malformed-header";
    case LoadErrorCode::kSyntax: return "syntax";
    case LoadErrorCode::kUnknownType: return "unknown-type";
    case LoadErrorCode::kUnknownRelation: return "unknown-relation";
    case LoadErrorCode::kUnknownLabel: return "unknown-label";
    case LoadErrorCode::kDuplicateNode: return "duplicate-node";
    case LoadErrorCode::kDuplicateDeclaration: return "duplicate-declaration";
    case LoadErrorCode::kDanglingEdge: return "dangling-edge";
    case LoadErrorCode::kUnknownNode: return "unknown-node";
    case LoadErrorCode::kTypeMismatch: return "type-mismatch";
    case LoadErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case LoadErrorCode::kBagNotBagType: return "bag-not-bag-type";
  }
  return "unknown";
}

HminLoadError::HminLoadError(LoadErrorCode code, std::size_t line,
                             const std::string& message)
    : Error(ErrorKind::kData,
            std::string(ToString(code)) +
                (line ? " at line " + std::to_string(line) : std::string()) +
                ": " + message),
      code_(code),
      line_(line) {}

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

std::vector<std::string> Tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void LoadFail(LoadErrorCode code, std::size_t line,
                           const std::string& msg) {
  throw HminLoadError(code, line, msg);
}

std::uint64_t ToU64(const std::string& tok, std::size_t line,
                    const char* what) {
  std::uint64_t v = 0;
  if (!ParseUint64(tok, &v)) {
    LoadFail(LoadErrorCode::kSyntax, line,
             std::string("expected unsigned integer ") + what + ", got '" +
                 tok + "'");
  }
  return v;
}

struct PendingBag {
  std::size_t line;
  std::uint64_t node;
  Matrix rows;
  std::vector<std::pair<std::uint64_t, std::size_t>> labels;  // id, line
};

}  // namespace

Hmin ParseHmin(const std::string& text) {
  std::vector<Line> lines;
  {
    std::istringstream in(text);
    std::string raw;
    std::size_t number = 0;
    while (std::getline(in, raw)) {
      ++number;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      const auto first = raw.find_first_not_of(" \t");
      if (first == std::string::npos || raw[first] == '#') continue;
      lines.push_back({number, Tokenize(raw)});
    }
  }
  if (lines.empty() || lines[0].tokens.size() != 2 ||
      lines[0].tokens[0] != "HMIN" || lines[0].tokens[1] != "v1") {
    LoadFail(LoadErrorCode::kMalformedHeader,
             lines.empty() ? 1 : lines[0].number, "expected 'HMIN v1'");
  }

  struct TypeDecl { std::string name; bool bag; std::size_t line; };
  struct RelDecl {
    std::string name, a, b;
    bool directed;
    std::size_t line;
  };
  struct NodeDecl { std::uint64_t id; std::string type; std::size_t line; };
  struct EdgeDecl {
    std::string rel;
    std::uint64_t src, dst;
    std::size_t line;
  };
  std::vector<TypeDecl> type_decls;
  std::vector<RelDecl> rel_decls;
  std::vector<NodeDecl> node_decls;
  std::vector<EdgeDecl> edge_decls;
  std::map<std::uint64_t, std::pair<std::string, std::size_t>> label_decls;
  std::vector<PendingBag> bag_decls;
  std::optional<std::size_t> dim;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Line& ln = lines[i];
    const auto& t = ln.tokens;
    const std::string& kind = t[0];
    if (kind == "T") {
      if (t.size() < 2 || t.size() > 3 || (t.size() == 3 && t[2] != "BAG")) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'T <type_name> [BAG]'");
      }
      type_decls.push_back({t[1], t.size() == 3, ln.number});
    } else if (kind == "R") {
      if (t.size() < 4 || t.size() > 5 ||
          (t.size() == 5 && t[4] != "DIRECTED")) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'R <name> <type_a> <type_b> [DIRECTED]'");
      }
      rel_decls.push_back({t[1], t[2], t[3], t.size() == 5, ln.number});
    } else if (kind == "N") {
      if (t.size() != 3) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'N <node_id> <type_name>'");
      }
      node_decls.push_back({ToU64(t[1], ln.number, "node id"), t[2],
                            ln.number});
    } else if (kind == "E") {
      if (t.size() != 4) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'E <relation> <src_id> <dst_id>'");
      }
      edge_decls.push_back({t[1], ToU64(t[2], ln.number, "src id"),
                            ToU64(t[3], ln.number, "dst id"), ln.number});
    } else if (kind == "L") {
      if (t.size() < 3) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'L <label_id> <label_name>'");
      }
      const std::uint64_t id = ToU64(t[1], ln.number, "label id");
      std::string name = t[2];
      for (std::size_t k = 3; k < t.size(); ++k) name += " " + t[k];
      if (!label_decls.emplace(id, std::make_pair(name, ln.number)).second) {
        LoadFail(LoadErrorCode::kDuplicateDeclaration, ln.number,
                 "label " + t[1] + " declared twice");
      }
    } else if (kind == "B") {
      if (t.size() != 4) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "expected 'B <node_id> <n_i> <d>'");
      }
      PendingBag pb;
      pb.line = ln.number;
      pb.node = ToU64(t[1], ln.number, "node id");
      const std::uint64_t n = ToU64(t[2], ln.number, "instance count");
      const std::uint64_t d = ToU64(t[3], ln.number, "dimension");
      if (n < 1) {
        LoadFail(LoadErrorCode::kSyntax, ln.number,
                 "a bag needs at least one instance");
      }
      if (dim && *dim != d) {
        LoadFail(LoadErrorCode::kDimensionMismatch, ln.number,
                 "bag declares d=" + std::to_string(d) +
                     " but earlier bags use d=" + std::to_string(*dim));
      }
      dim = d;
      pb.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
      for (std::uint64_t r = 0; r < n; ++r) {
        ++i;
        if (i >= lines.size()) {
          LoadFail(LoadErrorCode::kSyntax, ln.number,
                   "bag truncated: expected " + std::to_string(n) +
                       " instance rows");
        }
        const Line& row = lines[i];
        if (row.tokens.size() != d) {
          LoadFail(LoadErrorCode::kDimensionMismatch, row.number,
                   "instance row has " + std::to_string(row.tokens.size()) +
                       " values, expected d=" + std::to_string(d));
        }
        for (std::uint64_t c = 0; c < d; ++c) {
          double v = 0.0;
          if (!ParseDouble(row.tokens[c], &v)) {
            LoadFail(LoadErrorCode::kSyntax, row.number,
                     "bad float '" + row.tokens[c] + "'");
          }
          pb.rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
      }
      ++i;
      if (i >= lines.size() || lines[i].tokens[0] != "Y") {
        LoadFail(LoadErrorCode::kSyntax,
                 i < lines.size() ? lines[i].number : ln.number,
                 "expected 'Y <label_id>...' after bag rows");
      }
      for (std::size_t k = 1; k < lines[i].tokens.size(); ++k) {
        pb.labels.emplace_back(
            ToU64(lines[i].tokens[k], lines[i].number, "label id"),
            lines[i].number);
      }
      bag_decls.push_back(std::move(pb));
    } else {
      LoadFail(LoadErrorCode::kSyntax, ln.number,
               "unknown record kind '" + kind + "'");
    }
  }

  Hmin g;
  for (const TypeDecl& td : type_decls) {
    if (g.FindType(td.name)) {
      LoadFail(LoadErrorCode::kDuplicateDeclaration, td.line,
               "type '" + td.name + "' declared twice");
    }
    g.AddType(td.name, td.bag);
  }
  std::size_t bag_types = 0;
  for (const TypeDecl& td : type_decls) bag_types += td.bag ? 1 : 0;
  if (bag_types != 1) {
    LoadFail(LoadErrorCode::kMalformedHeader, 0,
             "exactly one type must carry the BAG flag, found " +
                 std::to_string(bag_types));
  }
  for (const RelDecl& rd : rel_decls) {
    if (g.FindRelation(rd.name)) {
      LoadFail(LoadErrorCode::kDuplicateDeclaration, rd.line,
               "relation '" + rd.name + "' declared twice");
    }
    auto a = g.FindType(rd.a);
    auto b = g.FindType(rd.b);
    if (!a || !b) {
      LoadFail(LoadErrorCode::kUnknownType, rd.line,
               "relation '" + rd.name + "' uses undeclared type '" +
                   (!a ? rd.a : rd.b) + "'");
    }
    g.AddRelation(rd.name, *a, *b, rd.directed);
  }
  for (const auto& [id, decl] : label_decls) g.AddLabel(id, decl.first);

  std::sort(node_decls.begin(), node_decls.end(),
            [](const NodeDecl& x, const NodeDecl& y) {
              return x.id != y.id ? x.id < y.id : x.line < y.line;
            });
  for (std::size_t k = 0; k < node_decls.size(); ++k) {
    const NodeDecl& nd = node_decls[k];
    if (k > 0 && node_decls[k - 1].id == nd.id) {
      LoadFail(LoadErrorCode::kDuplicateNode, nd.line,
               "node id " + std::to_string(nd.id) + " already declared at line " +
                   std::to_string(node_decls[k - 1].line));
    }
    auto t = g.FindType(nd.type);
    if (!t) {
      LoadFail(LoadErrorCode::kUnknownType, nd.line,
               "node uses undeclared type '" + nd.type + "'");
    }
    g.AddNode(nd.id, *t);
  }

  for (const EdgeDecl& ed : edge_decls) {
    auto r = g.FindRelation(ed.rel);
    if (!r) {
      LoadFail(LoadErrorCode::kUnknownRelation, ed.line,
               "edge uses undeclared relation '" + ed.rel + "'");
    }
    auto s = g.FindNode(ed.src);
    auto d = g.FindNode(ed.dst);
    if (!s || !d) {
      LoadFail(LoadErrorCode::kDanglingEdge, ed.line,
               "edge endpoint " + std::to_string(!s ? ed.src : ed.dst) +
                   " is not a declared node");
    }
    const Relation& rel = g.relation(*r);
    const TypeId ts = g.node_type(*s);
    const TypeId td = g.node_type(*d);
    const bool forward = ts == rel.type_a && td == rel.type_b;
    const bool backward = ts == rel.type_b && td == rel.type_a;
    if (!(forward || (!rel.directed && backward))) {
      LoadFail(LoadErrorCode::kTypeMismatch, ed.line,
               "edge endpoint types do not match relation '" + rel.name + "'");
    }
    g.AddEdge(*r, *s, *d);
  }

  const TypeId bag_type = g.bag_type();
  std::set<std::uint64_t> seen_bags;
  for (PendingBag& pb : bag_decls) {
    auto node = g.FindNode(pb.node);
    if (!node) {
      LoadFail(LoadErrorCode::kUnknownNode, pb.line,
               "bag for undeclared node " + std::to_string(pb.node));
    }
    if (g.node_type(*node) != bag_type) {
      LoadFail(LoadErrorCode::kBagNotBagType, pb.line,
               "node " + std::to_string(pb.node) + " is not of the bag type");
    }
    if (!seen_bags.insert(pb.node).second) {
      LoadFail(LoadErrorCode::kDuplicateDeclaration, pb.line,
               "bag " + std::to_string(pb.node) + " declared twice");
    }
    Bag bag;
    bag.node = *node;
    bag.instances = std::move(pb.rows);
    for (const auto& [label_id, line] : pb.labels) {
      auto li = g.FindLabel(label_id);
      if (!li) {
        LoadFail(LoadErrorCode::kUnknownLabel, line,
                 "label " + std::to_string(label_id) + " is not declared");
      }
      bag.labels.push_back(*li);
    }
    g.SetBag(std::move(bag));
  }
  g.Finalize();
  return g;
}

Hmin LoadHmin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw HminLoadError(LoadErrorCode::kIo, 0,
                        "cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseHmin(buf.str());
}

std::string SerializeHmin(const Hmin& g) {
  std::ostringstream out;
  out << "HMIN v1\n";
  for (const NodeType& t : g.types()) {
    out << "T " << t.name << (t.is_bag ? " BAG" : "") << "\n";
  }
  for (const Relation& r : g.relations()) {
    out << "R " << r.name << " " << g.type(r.type_a).name << " "
        << g.type(r.type_b).name << (r.directed ? " DIRECTED" : "") << "\n";
  }
  for (const Label& l : g.labels()) out << "L " << l.id << " " << l.name << "\n";
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    out << "N " << g.external_id(v) << " " << g.type(g.node_type(v)).name
        << "\n";
  }
  for (const TypedEdge& e : g.Edges()) {
    out << "E " << g.relation(e.relation).name << " " << g.external_id(e.src)
        << " " << g.external_id(e.dst) << "\n";
  }
  for (NodeId v : g.BagNodes()) {
    const Bag& b = g.bag(v);
    out << "B " << g.external_id(v) << " " << b.instances.rows() << " "
        << b.instances.cols() << "\n";
    for (Eigen::Index r = 0; r < b.instances.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.instances.cols(); ++c) {
        if (c) out << ' ';
        out << FormatDouble(b.instances(r, c));
      }
      out << "\n";
    }
    out << "Y";
    for (LabelIndex l : b.labels) out << " " << g.labels()[l].id;
    out << "\n";
  }
  return out.str();
}

void SaveHmin(const Hmin& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  }
  out << SerializeHmin(g);
}

std::vector<std::string> Validate(const Hmin& g) {
  std::vector<std::string> findings;
  std::size_t bag_types = 0;
  std::optional<TypeId> bag_type;
  std::set<std::string> names;
  for (TypeId t = 0; t < g.num_types(); ++t) {
    if (!names.insert(g.type(t).name).second) {
      findings.push_back("type name '" + g.type(t).name + "' is not unique");
    }
    if (g.type(t).is_bag) {
      ++bag_types;
      bag_type = t;
    }
  }
  if (bag_types != 1) {
    findings.push_back("expected exactly one bag type, found " +
                       std::to_string(bag_types));
  }

  const std::size_t n = g.num_nodes();
  for (NodeId v = 0; v < n; ++v) {
    const bool is_bag_node = bag_types == 1 && g.node_type(v) == *bag_type;
    const Bag* b = g.FindBag(v);
    if (is_bag_node && b == nullptr) {
      findings.push_back("bag node " + std::to_string(g.external_id(v)) +
                         " has no Bag record");
    }
    if (!is_bag_node && b != nullptr) {
      findings.push_back("node " + std::to_string(g.external_id(v)) +
                         " carries a Bag but is not of the bag type");
    }
  }

  std::optional<Eigen::Index> dim;
  for (NodeId v : g.BagNodes()) {
    const Bag& b = g.bag(v);
    const std::string who = "bag " + std::to_string(g.external_id(v));
    if (b.instances.rows() < 1) findings.push_back(who + " has no instances");
    if (dim && *dim != b.instances.cols()) {
      findings.push_back(who + " has instance dimension " +
                         std::to_string(b.instances.cols()) + ", expected " +
                         std::to_string(*dim));
    }
    if (!dim) dim = b.instances.cols();
    if (!b.instances.allFinite()) {
      findings.push_back(who + " has non-finite instance values");
    }
    for (LabelIndex l : b.labels) {
      if (l >= g.num_labels()) {
        findings.push_back(who + " references label index " +
                           std::to_string(l) + " outside the universe");
      }
    }
  }

  std::map<std::tuple<NodeId, NodeId, RelationId>, int> arc_count;
  for (NodeId v = 0; v < n; ++v) {
    for (const Arc& a : g.arcs(v)) {
      if (a.neighbor >= n) {
        findings.push_back("arc from " + std::to_string(g.external_id(v)) +
                           " points to missing node index " +
                           std::to_string(a.neighbor));
        continue;
      }
      if (a.relation >= g.num_relations()) {
        findings.push_back("arc from " + std::to_string(g.external_id(v)) +
                           " uses undeclared relation");
        continue;
      }
      const Relation& rel = g.relation(a.relation);
      const TypeId ts = g.node_type(v);
      const TypeId td = g.node_type(a.neighbor);
      const bool ok = (ts == rel.type_a && td == rel.type_b) ||
                      (!rel.directed && ts == rel.type_b && td == rel.type_a);
      if (!ok) {
        findings.push_back("arc " + std::to_string(g.external_id(v)) + " -> " +
                           std::to_string(g.external_id(a.neighbor)) +
                           " does not match the types of relation '" +
                           rel.name + "'");
      }
      ++arc_count[{v, a.neighbor, a.relation}];
    }
  }
  for (const auto& [key, count] : arc_count) {
    const auto& [u, v, r] = key;
    if (g.relation(r).directed || u == v) continue;
    auto mirror = arc_count.find({v, u, r});
    const int back = mirror == arc_count.end() ? 0 : mirror->second;
    if (back < count) {
      findings.push_back("asymmetric edge under undirected relation '" +
                         g.relation(r).name + "': " +
                         std::to_string(g.external_id(u)) + " -> " +
                         std::to_string(g.external_id(v)) +
                         " has no matching " + std::to_string(g.external_id(v)) +
                         " -> " + std::to_string(g.external_id(u)));
    }
  }
  return findings;
}

}  // namespace metamiml
