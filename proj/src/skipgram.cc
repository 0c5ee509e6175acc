#include "metamiml/skipgram.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace metamiml {

double LeakyRelu(double x, double slope) { return x >= 0.0 ? x : slope * x; }

double LeakyReluGrad(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

void SgConfig::Check() const {
  if (dim < 1) Fail(ErrorKind::kConfig, "embedding dimension must be >= 1");
  if (window < 1) Fail(ErrorKind::kConfig, "window must be >= 1");
  if (negatives < 1) Fail(ErrorKind::kConfig, "negatives must be >= 1");
  if (!(slope > 0.0 && slope < 1.0)) {
    Fail(ErrorKind::kConfig, "leaky ReLU slope must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0)) {
    Fail(ErrorKind::kConfig, "skip-gram learning rate must be positive");
  }
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  return path == other.path && slope == other.slope &&
         W.rows() == other.W.rows() && W.cols() == other.W.cols() &&
         W == other.W && C.rows() == other.C.rows() &&
         C.cols() == other.C.cols() && C == other.C &&
         b.size() == other.b.size() && b == other.b;
}

EmbeddingTable InitEmbeddingTable(std::size_t num_nodes, const SgConfig& cfg,
                                  std::uint32_t path) {
  EmbeddingTable t;
  t.path = path;
  t.slope = cfg.slope;
  const auto n = static_cast<Eigen::Index>(num_nodes);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  t.W.resize(n, d);
  t.C.resize(n, d);
  t.b = Vector::Zero(d);
  Rng rng(DeriveSeed(cfg.seed, 0x5347'494eULL, path));
  const double r = 0.5 / static_cast<double>(cfg.dim);
  std::uniform_real_distribution<double> u(-r, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) t.W(i, j) = u(rng);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) t.C(i, j) = u(rng);
  }
  return t;
}

std::vector<std::pair<NodeId, NodeId>> EnumeratePairs(
    const std::vector<NodeId>& walk, std::size_t window) {
  std::vector<std::pair<NodeId, NodeId>> out;
  const std::size_t n = walk.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) out.emplace_back(walk[i], walk[j]);
    }
  }
  return out;
}

namespace {

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double LogSigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

// Per-type alias-free sampler: cumulative weights over the nodes of a type.
struct TypeSampler {
  std::vector<NodeId> nodes;
  std::vector<double> cumulative;

  NodeId Draw(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cumulative.back());
    const double x = u(rng);
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
    std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
    if (idx >= nodes.size()) idx = nodes.size() - 1;
    return nodes[idx];
  }
};

}  // namespace

SgTrainResult TrainSkipGram(const Hmin& g, const WalkCorpus& corpus,
                            std::uint32_t path, const SgConfig& cfg) {
  cfg.Check();
  if (path >= corpus.by_path.size() || corpus.by_path[path].empty()) {
    Fail(ErrorKind::kData,
         "walk corpus has no walks for meta-path " + std::to_string(path));
  }
  const auto& walks = corpus.by_path[path];

  std::vector<double> freq(g.num_nodes(), 0.0);
  for (const Walk& w : walks) {
    for (NodeId v : w.nodes) freq[v] += 1.0;
  }
  std::vector<TypeSampler> samplers(g.num_types());
  for (TypeId t = 0; t < g.num_types(); ++t) {
    TypeSampler& s = samplers[t];
    double total = 0.0;
    for (NodeId v : g.NodesOfType(t)) {
      if (freq[v] > 0) {
        total += std::pow(freq[v], 0.75);
        s.nodes.push_back(v);
        s.cumulative.push_back(total);
      }
    }
    if (s.nodes.empty()) {
      // Type never visited on this path: fall back to uniform.
      for (NodeId v : g.NodesOfType(t)) {
        total += 1.0;
        s.nodes.push_back(v);
        s.cumulative.push_back(total);
      }
    }
  }

  SgTrainResult result;
  result.table = InitEmbeddingTable(g.num_nodes(), cfg, path);
  EmbeddingTable& t = result.table;
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  Vector grad(d);

  std::vector<std::size_t> order(walks.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(cfg.seed, 0x5347'5452ULL, path));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t pairs = 0;
    for (std::size_t wi : order) {
      for (const auto& [center, context] :
           EnumeratePairs(walks[wi].nodes, cfg.window)) {
        grad.setZero();
        auto wc = t.W.row(center);
        {
          auto cx = t.C.row(context);
          const double f = wc.dot(cx);
          loss -= LogSigmoid(f);
          const double gcoef = (1.0 - Sigmoid(f)) * cfg.learning_rate;
          grad += gcoef * cx.transpose();
          cx += gcoef * wc;
        }
        const TypeSampler& sampler = samplers[g.node_type(context)];
        for (std::size_t k = 0; k < cfg.negatives; ++k) {
          const NodeId neg = sampler.Draw(rng);
          if (neg == context) continue;
          auto cn = t.C.row(neg);
          const double f = wc.dot(cn);
          loss -= LogSigmoid(-f);
          const double gcoef = -Sigmoid(f) * cfg.learning_rate;
          grad += gcoef * cn.transpose();
          cn += gcoef * wc;
        }
        wc += grad.transpose();
        ++pairs;
      }
    }
    result.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  if (!t.W.allFinite() || !t.C.allFinite()) {
    Fail(ErrorKind::kDivergence, "skip-gram produced non-finite embeddings");
  }
  return result;
}

BagContext ComputeBagContext(const EmbeddingTable& table, NodeId bag) {
  if (bag >= table.W.rows()) {
    Fail(ErrorKind::kInvalidArgument,
         "node " + std::to_string(bag) + " is not in the embedding table");
  }
  BagContext out;
  const Vector pre = table.W.row(bag).transpose() + table.b;
  out.value.resize(pre.size());
  out.gate.resize(pre.size());
  for (Eigen::Index j = 0; j < pre.size(); ++j) {
    out.value[j] = LeakyRelu(pre[j], table.slope);
    out.gate[j] = LeakyReluGrad(pre[j], table.slope);
  }
  return out;
}

std::string SerializeEmbedding(const EmbeddingTable& table, const Hmin& g) {
  std::ostringstream out;
  out << "SGEMB v1 " << table.W.rows() << " " << table.W.cols() << " "
      << table.path << "\n";
  out << "SLOPE " << FormatDouble(table.slope) << "\n";
  for (Eigen::Index v = 0; v < table.W.rows(); ++v) {
    out << g.external_id(static_cast<NodeId>(v));
    for (Eigen::Index j = 0; j < table.W.cols(); ++j) {
      out << " " << FormatDouble(table.W(v, j));
    }
    out << "\n";
  }
  out << "BIAS";
  for (Eigen::Index j = 0; j < table.b.size(); ++j) {
    out << " " << FormatDouble(table.b[j]);
  }
  out << "\n";
  return out.str();
}

void SaveEmbedding(const EmbeddingTable& table, const Hmin& g,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeEmbedding(table, g);
}

EmbeddingTable ParseEmbedding(const std::string& text, const Hmin& g) {
  std::istringstream in(text);
  std::string magic, version;
  std::size_t rows = 0, cols = 0;
  std::uint32_t path = 0;
  in >> magic >> version >> rows >> cols >> path;
  if (!in || magic != "SGEMB" || version != "v1") {
    Fail(ErrorKind::kData, "embedding header: expected 'SGEMB v1 ...'");
  }
  if (rows != g.num_nodes()) {
    Fail(ErrorKind::kData, "embedding has " + std::to_string(rows) +
                               " rows but the network has " +
                               std::to_string(g.num_nodes()) + " nodes");
  }
  EmbeddingTable t;
  t.path = path;
  t.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  t.C = RowMatrix::Zero(static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
  t.b.resize(static_cast<Eigen::Index>(cols));
  auto read_double = [&](double* v) {
    std::string tok;
    if (!(in >> tok) || !ParseDouble(tok, v)) {
      Fail(ErrorKind::kData, "embedding file: bad number '" + tok + "'");
    }
  };
  std::string tag;
  in >> tag;
  if (tag != "SLOPE") Fail(ErrorKind::kData, "embedding file: missing SLOPE");
  read_double(&t.slope);
  std::vector<bool> seen(rows, false);
  for (std::size_t r = 0; r < rows; ++r) {
    std::uint64_t ext = 0;
    std::string tok;
    in >> tok;
    if (!ParseUint64(tok, &ext)) {
      Fail(ErrorKind::kData, "embedding file: bad node id '" + tok + "'");
    }
    auto v = g.FindNode(ext);
    if (!v || seen[*v]) {
      Fail(ErrorKind::kData, "embedding file: unknown or repeated node " + tok);
    }
    seen[*v] = true;
    for (std::size_t j = 0; j < cols; ++j) {
      read_double(&t.W(*v, static_cast<Eigen::Index>(j)));
    }
  }
  in >> tag;
  if (tag != "BIAS") Fail(ErrorKind::kData, "embedding file: missing BIAS");
  for (std::size_t j = 0; j < cols; ++j) {
    read_double(&t.b[static_cast<Eigen::Index>(j)]);
  }
  return t;
}

EmbeddingTable LoadEmbedding(const std::filesystem::path& path, const Hmin& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseEmbedding(buf.str(), g);
}

}  // namespace metamiml
