// Meta-learning engine: per-task inner adaptation of the context learner and
// task learner, attention fusion over meta-paths, the first-order outer
// update of the global prior and fast adaptation on target tasks.

#ifndef METAMIML_META_H_
#define METAMIML_META_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metamiml/common.h"
#include "metamiml/episodes.h"
#include "metamiml/hmin.h"
#include "metamiml/projection.h"
#include "metamiml/skipgram.h"
#include "metamiml/tasklearner.h"

namespace metamiml {

enum class AttentionSign {
  kNegated,  // softmax(-loss): better paths weigh more
  kLiteral,  // softmax(+loss)
};

enum class OmegaFusion {
  kFused,    // omega_i^p <- omega_i - beta * grad
  kProduct,  // omega_i^p <- (omega (.) omega_i) - beta * grad
};

struct MetaRates {
  double alpha = 0.005;  // context learner inner rate
  double beta = 0.005;   // task learner inner rate
  double gamma = 0.005;  // outer rate

  void Check() const;
  bool operator==(const MetaRates&) const = default;
};

// phi = {theta, omega}: one embedding table per meta-path plus the task
// learner weights.
struct GlobalPrior {
  std::vector<EmbeddingTable> theta;
  OmegaParams omega;
  MetaRates rates;

  bool operator==(const GlobalPrior&) const = default;
};

struct MetaConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  double slope = 0.01;  // trunk leaky-ReLU slope
  AttentionSign attention_sign = AttentionSign::kNegated;
  OmegaFusion omega_fusion = OmegaFusion::kFused;
  std::uint64_t seed = 0;
  int threads = 1;
  // Re-evaluates each batch after its update (costs a second inner pass).
  bool track_steps = false;
};

// What a task sees of the graph: instances and the shared projection.
struct MetaEnv {
  const Hmin* graph = nullptr;
  const ProjectionMatrix* projection = nullptr;
};

// Locally adapted copy of the bag's embedding row and of the bias.
struct ThetaRow {
  Vector w;
  Vector b;
};

// One step on the bag row and bias: both move by -alpha * gate (.) E_c^T
// (sum over rows of dL/dX_hat).
ThetaRow LocalUpdateTheta(const EmbeddingTable& table, NodeId bag,
                          const Matrix& grad_projected, std::size_t instance_dim,
                          const ProjectionMatrix& E, double alpha);

BagContext ContextFromRow(const ThetaRow& row, double slope);

Vector AttentionWeights(const Vector& losses,
                        AttentionSign sign = AttentionSign::kNegated);
double AttentionEntropy(const Vector& weights);

struct TaskAdaptation {
  std::vector<ThetaRow> theta;            // per path
  std::vector<BagContext> contexts;       // adapted contexts per path
  std::vector<Matrix> projected;          // adapted X_hat^p
  Vector path_losses;                     // support loss per path at the prior
  Vector attention;
  OmegaParams omega_fused;                // omega_i (before the omega step)
  std::vector<OmegaParams> omega_paths;   // omega_i^p after the step
  OmegaParams omega_combined;             // sum_p a_p omega_i^p
  Matrix fused;                           // X_hat_i
  double support_loss_before = 0.0;       // L(omega_i, X_hat_i)
  double support_loss_after = 0.0;        // L(omega_combined, X_hat_i)
};

TaskAdaptation InnerAdapt(const GlobalPrior& prior, const Task& task,
                          const MetaEnv& env, const MetaConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double support_loss = 0.0;
  double query_loss = 0.0;
  double attention_entropy = 0.0;
};

struct StepRecord {
  std::size_t epoch = 0;
  double query_before = 0.0;  // batch mean before the update
  double query_after = 0.0;   // same batch, updated prior
};

struct MetaTrainResult {
  GlobalPrior prior;
  std::vector<EpochRecord> history;
  std::vector<StepRecord> steps;  // filled when track_steps is set
};

MetaTrainResult MetaTrain(const GlobalPrior& prior,
                          const std::vector<Task>& tasks, const MetaEnv& env,
                          const MetaConfig& cfg);

// Batch-mean query loss of `tasks` after inner adaptation under `prior`.
double MeanQueryLoss(const GlobalPrior& prior, const std::vector<Task>& tasks,
                     const MetaEnv& env, const MetaConfig& cfg);

struct AdaptedPrediction {
  TaskPrediction prediction;
  Vector attention;
  double support_loss_before = 0.0;
  double support_loss_after = 0.0;
};

// steps = 0: forward of the prior on the attention-fused prior contexts.
// steps >= 1: one inner adaptation, then steps - 1 further omega steps on
// the support loss.
AdaptedPrediction AdaptAndPredict(const GlobalPrior& prior, const Task& task,
                                  std::size_t steps, const MetaEnv& env,
                                  const MetaConfig& cfg);

struct WarmStartOptions {
  // Imprinted head norm; 0 skips imprinting.
  double imprint_scale = 4.0;
  // Gradient passes over the support sets after imprinting.
  std::size_t epochs = 0;
  double learning_rate = 0.5;
};

// Initialises the head rows of `labels` from the support sets of `tasks`
// with the trunk and contexts frozen. Imprinting points each row along the
// difference of mean pooled trunk features of positive and negative bags
// (bias at the midpoint); optional gradient passes refine the rows.
GlobalPrior WarmStartHeads(const GlobalPrior& prior,
                           const std::vector<Task>& tasks,
                           const std::vector<LabelIndex>& labels,
                           const MetaEnv& env, const MetaConfig& cfg,
                           const WarmStartOptions& options);

// Tab separated, header then one line per epoch; values round-trip.
std::string FormatHistory(const std::vector<EpochRecord>& history);
void SaveHistory(const std::vector<EpochRecord>& history,
                 const std::filesystem::path& path);

}  // namespace metamiml

#endif  // METAMIML_META_H_
