// Run configuration and the pipeline stages behind the command-line tool.

#ifndef METAMIML_PIPELINE_H_
#define METAMIML_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metamiml/episodes.h"
#include "metamiml/hmin.h"
#include "metamiml/meta.h"
#include "metamiml/metrics.h"
#include "metamiml/projection.h"
#include "metamiml/skipgram.h"
#include "metamiml/synth.h"
#include "metamiml/walks.h"

namespace metamiml {

struct RunConfig {
  std::string graph;
  std::string out;
  std::uint64_t seed = 7;
  int threads = 0;  // 0: all cores
  std::vector<std::string> paths = {"G-D-G", "G-M-G", "G-D-M-G"};

  std::size_t walk_length = 40;
  std::size_t walks_per_node = 10;
  std::size_t window = 4;

  std::size_t embed_dim = 16;
  std::size_t negatives = 5;
  std::size_t embed_epochs = 5;
  double embed_lr = 0.025;
  double embed_slope = 0.01;

  std::size_t proj_k = 32;
  SparsityPolicy s_policy = SparsityPolicy::kSqrtN;

  std::size_t h1 = 0;  // 0: same as proj_k
  std::size_t h2 = 0;
  double task_slope = 0.01;

  MetaRates rates;
  std::size_t batch = 32;
  std::size_t meta_epochs = 20;
  std::size_t inner_steps = 1;
  AttentionSign attention_sign = AttentionSign::kNegated;
  OmegaFusion omega_fusion = OmegaFusion::kFused;
  double imprint_scale = 4.0;
  std::size_t warm_start_epochs = 0;
  double warm_start_lr = 0.5;

  double ratio = 0.8;
  std::size_t query_labels = 1;
  std::size_t repeats = 10;

  std::size_t metrics_k = 0;  // 0: rounded mean labels per row

  SynthConfig synth;

  int EffectiveThreads() const;
  std::size_t EffectiveH1() const { return h1 ? h1 : proj_k; }
  std::size_t EffectiveH2() const { return h2 ? h2 : proj_k; }
  void Check() const;
};

// Sets one dotted key from its text value; unknown keys are config errors.
void SetConfigValue(RunConfig* cfg, const std::string& key,
                    const std::string& value);
// Flat `key = value` lines; '#' starts a comment.
RunConfig ParseRunConfig(const std::string& text, RunConfig base = {});
RunConfig LoadRunConfig(const std::filesystem::path& path, RunConfig base = {});
// Every key in a fixed order with its current value.
std::string CanonicalConfig(const RunConfig& cfg);
std::vector<std::string> ConfigKeys();

std::vector<MetaPath> ResolvePaths(const RunConfig& cfg, const Hmin& g);
WalkConfig MakeWalkConfig(const RunConfig& cfg);
SgConfig MakeSgConfig(const RunConfig& cfg);
MetaConfig MakeMetaConfig(const RunConfig& cfg, std::size_t repeat);
WarmStartOptions MakeWarmStart(const RunConfig& cfg);

WalkCorpus RunWalks(const Hmin& g, const RunConfig& cfg);
std::vector<EmbeddingTable> RunEmbed(const Hmin& g, const WalkCorpus& corpus,
                                     const RunConfig& cfg);

// One seeded split with its projection, tasks and prior.
struct Experiment {
  std::size_t repeat = 0;
  SplitSpec split;
  ProjectionMatrix projection;
  std::vector<Task> source;
  std::vector<Task> target;
  GlobalPrior prior;  // meta-trained when produced by RunTrain
  std::vector<EpochRecord> history;
};

// Split, projection, tasks and the untrained prior for repeat `repeat`.
Experiment PrepareExperiment(const Hmin& g, const WalkCorpus& corpus,
                             const std::vector<EmbeddingTable>& tables,
                             const RunConfig& cfg, std::size_t repeat);
// PrepareExperiment followed by meta-training on the source tasks.
Experiment RunTrain(const Hmin& g, const WalkCorpus& corpus,
                    const std::vector<EmbeddingTable>& tables,
                    const RunConfig& cfg, std::size_t repeat);

struct PredictionCell {
  NodeId bag = 0;
  LabelIndex label = 0;
  double truth = 0.0;
  double score = 0.0;
};

struct Predictions {
  std::size_t steps = 0;
  std::vector<PredictionCell> cells;  // target query cells, bag-major
};

// steps >= 1 warm-starts the target label heads on target support sets and
// then adapts each target task; steps = 0 predicts with the prior as is.
Predictions RunAdapt(const Hmin& g, const Experiment& exp, std::size_t steps,
                     const RunConfig& cfg);

// Rows: distinct bags, columns: distinct labels; the mask marks cells that
// carry a prediction.
ScoreMatrix ToScoreMatrix(const Predictions& preds);

// Repeated seeded splits: train, adapt, evaluate, aggregate.
std::vector<ReportRow> RunReport(const Hmin& g, const WalkCorpus& corpus,
                                 const std::vector<EmbeddingTable>& tables,
                                 const RunConfig& cfg);

struct SweepRow {
  std::string param;
  std::string value;
  ReportRow row;
};
std::vector<SweepRow> RunSweep(const Hmin& g, const RunConfig& cfg,
                               const std::string& param,
                               const std::vector<std::string>& values);
std::string FormatSweep(const std::vector<SweepRow>& rows);

// Artifact formats.
std::string SerializePredictions(const Predictions& preds, const Hmin& g);
Predictions ParsePredictions(const std::string& text, const Hmin& g);
void SavePrior(const GlobalPrior& prior, const Hmin& g,
               const std::filesystem::path& dir);
GlobalPrior LoadPrior(const Hmin& g, const std::filesystem::path& dir);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& text);

// Records the config hash, seed and content hash of each listed file in
// `dir/manifest.txt`, merging with entries already there.
void UpdateManifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::vector<std::string>& files);

}  // namespace metamiml

#endif  // METAMIML_PIPELINE_H_
