// Heterogeneous multi-instance network (HMIN): typed nodes, typed edges and
// bags of instance feature rows with label sets.

#ifndef METAMIML_HMIN_H_
#define METAMIML_HMIN_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "metamiml/common.h"

namespace metamiml {

struct NodeType {
  std::string name;
  bool is_bag = false;

  bool operator==(const NodeType&) const = default;
};

struct Relation {
  std::string name;
  TypeId type_a = 0;
  TypeId type_b = 0;
  bool directed = false;

  bool operator==(const Relation&) const = default;
};

struct TypedEdge {
  NodeId src = 0;
  NodeId dst = 0;
  RelationId relation = 0;

  bool operator==(const TypedEdge&) const = default;
};

struct Label {
  std::uint64_t id = 0;
  std::string name;

  bool operator==(const Label&) const = default;
};

struct Bag {
  NodeId node = 0;
  Matrix instances;                 // n_i x d
  std::vector<LabelIndex> labels;   // sorted, unique

  bool operator==(const Bag& other) const {
    return node == other.node && labels == other.labels &&
           instances.rows() == other.instances.rows() &&
           instances.cols() == other.instances.cols() &&
           instances == other.instances;
  }
};

// One adjacency entry: `neighbor` is reachable from the owning node through
// `relation`.
struct Arc {
  NodeId neighbor = 0;
  RelationId relation = 0;

  bool operator==(const Arc&) const = default;
  auto operator<=>(const Arc&) const = default;
};

class Hmin {
 public:
  Hmin() = default;

  // Schema construction.
  TypeId AddType(const std::string& name, bool is_bag);
  RelationId AddRelation(const std::string& name, TypeId a, TypeId b,
                         bool directed);
  LabelIndex AddLabel(std::uint64_t id, const std::string& name);

  // Adds a node with the given external id. Dense ids are handed out in
  // call order; Finalize() does not renumber.
  NodeId AddNode(std::uint64_t external_id, TypeId type);

  // Adds an edge; undirected relations insert both arcs.
  void AddEdge(RelationId relation, NodeId src, NodeId dst);

  // Inserts a single arc without its mirror. Only meaningful for directed
  // relations; exposed so validation can be exercised on broken graphs.
  void AddArc(NodeId from, NodeId to, RelationId relation);

  void SetBag(Bag bag);

  // Sorts adjacency and builds the typed-neighbour index. Must be called
  // after the last mutation and before queries.
  void Finalize();

  // Schema.
  std::size_t num_types() const { return types_.size(); }
  const NodeType& type(TypeId t) const { return types_.at(t); }
  const std::vector<NodeType>& types() const { return types_; }
  std::optional<TypeId> FindType(const std::string& name) const;
  // Throws if the network does not have exactly one bag type.
  TypeId bag_type() const;

  std::size_t num_relations() const { return relations_.size(); }
  const Relation& relation(RelationId r) const { return relations_.at(r); }
  const std::vector<Relation>& relations() const { return relations_; }
  std::optional<RelationId> FindRelation(const std::string& name) const;
  // True if some relation lets a walk step from a node of type `from` to a
  // node of type `to`.
  bool Connects(TypeId from, TypeId to) const;

  std::size_t num_labels() const { return labels_.size(); }
  const std::vector<Label>& labels() const { return labels_; }
  std::optional<LabelIndex> FindLabel(std::uint64_t id) const;

  // Nodes.
  std::size_t num_nodes() const { return node_type_.size(); }
  TypeId node_type(NodeId v) const { return node_type_.at(v); }
  std::uint64_t external_id(NodeId v) const { return external_ids_.at(v); }
  std::optional<NodeId> FindNode(std::uint64_t external_id) const;
  std::vector<NodeId> NodesOfType(TypeId t) const;

  // Adjacency.
  std::span<const Arc> arcs(NodeId v) const;
  std::size_t num_arcs() const;
  // Neighbours of `node` with type `t`, unique and in ascending id order.
  // Throws kInvalidArgument for an unknown node.
  std::span<const NodeId> NeighborsOfType(NodeId node, TypeId t) const;
  // All distinct neighbours, ascending.
  std::vector<NodeId> Neighbors(NodeId node) const;

  // Edge list equivalent to the adjacency: one entry per undirected pair and
  // one per directed arc.
  std::vector<TypedEdge> Edges() const;

  // Bags.
  const Bag* FindBag(NodeId node) const;
  const Bag& bag(NodeId node) const;
  std::vector<NodeId> BagNodes() const;  // ascending
  std::size_t num_bags() const { return bags_.size(); }
  // Instance dimension, or 0 when there are no bags.
  std::size_t instance_dim() const;

  bool finalized() const { return finalized_; }

  // Structural equality (schema, nodes, adjacency, bags, labels).
  bool operator==(const Hmin& other) const;

 private:
  std::vector<NodeType> types_;
  std::vector<Relation> relations_;
  std::vector<Label> labels_;
  std::vector<TypeId> node_type_;
  std::vector<std::uint64_t> external_ids_;
  std::unordered_map<std::uint64_t, NodeId> by_external_;
  std::vector<std::vector<Arc>> adjacency_;
  std::map<NodeId, Bag> bags_;

  // CSR index: typed_offsets_[v * num_types + t] .. [+1].
  std::vector<std::size_t> typed_offsets_;
  std::vector<NodeId> typed_neighbors_;
  bool finalized_ = false;
};

// Why Load failed.
enum class LoadErrorCode {
  kIo,
  kMalformedHeader,
  kSyntax,
  kUnknownType,
  kUnknownRelation,
  kUnknownLabel,
  kDuplicateNode,
  kDuplicateDeclaration,
  kDanglingEdge,
  kUnknownNode,
  kTypeMismatch,
  kDimensionMismatch,
  kBagNotBagType,
};

const char* ToString(LoadErrorCode code);

class HminLoadError : public Error {
 public:
  HminLoadError(LoadErrorCode code, std::size_t line,
                const std::string& message);

  LoadErrorCode code() const { return code_; }
  // 1-based line number; 0 when not tied to a line.
  std::size_t line() const { return line_; }

 private:
  LoadErrorCode code_;
  std::size_t line_;
};

// Parses the HMIN v1 text format. Nodes are renumbered densely in ascending
// external id order, labels likewise.
Hmin LoadHmin(const std::filesystem::path& path);
Hmin ParseHmin(const std::string& text);

void SaveHmin(const Hmin& g, const std::filesystem::path& path);
std::string SerializeHmin(const Hmin& g);

// Invariant violations; empty means valid. Never mutates `g`.
std::vector<std::string> Validate(const Hmin& g);

}  // namespace metamiml

#endif  // METAMIML_HMIN_H_
