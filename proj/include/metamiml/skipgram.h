// Context learner: per-meta-path skip-gram with heterogeneous negative
// sampling, and the bag context readout sigma(W[bag] + b).

#ifndef METAMIML_SKIPGRAM_H_
#define METAMIML_SKIPGRAM_H_

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "metamiml/common.h"
#include "metamiml/hmin.h"
#include "metamiml/walks.h"

namespace metamiml {

double LeakyRelu(double x, double slope);
// Derivative, taking the right-hand value (1) at exactly zero.
double LeakyReluGrad(double x, double slope);

struct SgConfig {
  std::size_t dim = 16;       // d_l
  std::size_t window = 4;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double slope = 0.01;        // leaky ReLU slope used by BagContext
  std::uint64_t seed = 0;

  void Check() const;
};

struct EmbeddingTable {
  RowMatrix W;     // |V| x d_l, centre embeddings (lookup table)
  RowMatrix C;     // |V| x d_l, context embeddings
  Vector b;        // d_l
  double slope = 0.01;
  std::uint32_t path = 0;

  std::size_t dim() const { return static_cast<std::size_t>(W.cols()); }
  bool operator==(const EmbeddingTable& other) const;
};

// Uniform [-0.5/d, 0.5/d] for W and C, zero bias.
EmbeddingTable InitEmbeddingTable(std::size_t num_nodes, const SgConfig& cfg,
                                  std::uint32_t path);

// (centre, context) pairs of one walk, in centre-major order.
std::vector<std::pair<NodeId, NodeId>> EnumeratePairs(
    const std::vector<NodeId>& walk, std::size_t window);

struct SgTrainResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per pair
};

// Trains on the walks of meta-path `path`. Negatives for a context node are
// drawn from the unigram^0.75 distribution over nodes of the same type.
SgTrainResult TrainSkipGram(const Hmin& g, const WalkCorpus& corpus,
                            std::uint32_t path, const SgConfig& cfg);

// X_i^p = leaky(W[bag] + b).
struct BagContext {
  Vector value;  // d_l
  // Elementwise derivative of the activation; dX/dW[bag] = dX/db =
  // diag(gate).
  Vector gate;
};

BagContext ComputeBagContext(const EmbeddingTable& table, NodeId bag);

// Embedding file: `SGEMB v1 <|V|> <d_l> <path>`, a `SLOPE` line, one line per
// node (external id then the W row), then a `BIAS` line.
void SaveEmbedding(const EmbeddingTable& table, const Hmin& g,
                   const std::filesystem::path& path);
std::string SerializeEmbedding(const EmbeddingTable& table, const Hmin& g);
EmbeddingTable LoadEmbedding(const std::filesystem::path& path, const Hmin& g);
EmbeddingTable ParseEmbedding(const std::string& text, const Hmin& g);

}  // namespace metamiml

#endif  // METAMIML_SKIPGRAM_H_
