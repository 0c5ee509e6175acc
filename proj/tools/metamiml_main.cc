// metamiml: command-line driver for the synth/walk/embed/train/adapt/eval
// pipeline. Exit codes: 0 ok, 2 config error, 3 data error, 4 divergence.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metamiml/pipeline.h"

namespace fs = std::filesystem;
using namespace metamiml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct CommonFlags {
  std::string config;
  std::string graph;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

void AddCommon(CLI::App* app, CommonFlags* f, bool needs_graph) {
  app->add_option("--config", f->config, "flat key = value config file");
  auto* g = app->add_option("--graph", f->graph, "HMIN v1 graph file");
  if (needs_graph) g->required();
  app->add_option("--out", f->out, "run directory")->required();
  app->add_option("--seed", f->seed, "master seed");
  app->add_option("--threads", f->threads, "worker cap (default: all cores)");
}

RunConfig Resolve(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = LoadRunConfig(f.config);
  if (!f.graph.empty()) cfg.graph = f.graph;
  cfg.out = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 1) Fail(ErrorKind::kConfig, "--threads must be >= 1");
    cfg.threads = *f.threads;
  }
  return cfg;
}

Hmin LoadGraph(const RunConfig& cfg) {
  Hmin g = LoadHmin(cfg.graph);
  const auto findings = Validate(g);
  if (!findings.empty()) {
    Fail(ErrorKind::kData, "graph failed validation: " + findings.front());
  }
  return g;
}

std::vector<EmbeddingTable> LoadTables(const Hmin& g, const fs::path& dir,
                                       std::size_t paths) {
  std::vector<EmbeddingTable> tables;
  for (std::size_t p = 0; p < paths; ++p) {
    tables.push_back(LoadEmbedding(dir / ("embed_" + std::to_string(p) + ".txt"), g));
  }
  return tables;
}

// Rebuilds the repeat-0 experiment from stored artifacts.
Experiment LoadExperiment(const Hmin& g, const RunConfig& cfg,
                          const fs::path& dir) {
  const WalkCorpus corpus = LoadCorpus(dir / "walks.txt", g);
  Experiment exp;
  exp.split = LoadSplit(dir / "split.txt", g);
  exp.projection = LoadProjection(dir / "projection.txt");
  exp.prior = LoadPrior(g, dir);
  const std::uint64_t episode_seed = DeriveSeed(StageSeed(cfg.seed, "episodes"), 0, 0);
  exp.source = BuildTasks(g, corpus, exp.split, false, cfg.query_labels,
                          episode_seed, cfg.EffectiveThreads());
  exp.target = BuildTasks(g, corpus, exp.split, true, cfg.query_labels,
                          episode_seed, cfg.EffectiveThreads());
  return exp;
}

void SaveConfig(const fs::path& dir, const RunConfig& cfg) {
  WriteFile(dir / "config.txt", CanonicalConfig(cfg));
}

int CmdSynth(const RunConfig& cfg) {
  const fs::path dir = cfg.out;
  SynthConfig sc = cfg.synth;
  sc.seed = StageSeed(cfg.seed, "synth");
  const SynthResult r = GenerateSynthetic(sc);
  fs::create_directories(dir);
  SaveHmin(r.graph, dir / "graph.hmin");
  SaveManifest(r.manifest, dir / "synth_manifest.txt");
  SaveConfig(dir, cfg);
  UpdateManifest(dir, cfg, {"config.txt", "graph.hmin", "synth_manifest.txt"});
  std::cout << "synth: " << r.graph.num_nodes() << " nodes, " << r.graph.num_bags()
            << " bags, oracle macro-F1 " << FormatFixed4(r.manifest.oracle_macro_f1)
            << "\n";
  return kExitOk;
}

int CmdWalk(const RunConfig& cfg) {
  const Hmin g = LoadGraph(cfg);
  const WalkCorpus corpus = RunWalks(g, cfg);
  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  SaveCorpus(corpus, g, dir / "walks.txt");
  SaveConfig(dir, cfg);
  UpdateManifest(dir, cfg, {"config.txt", "walks.txt"});
  std::cout << "walk: " << corpus.num_walks() << " walks\n";
  return kExitOk;
}

int CmdEmbed(const RunConfig& cfg) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const WalkCorpus corpus = LoadCorpus(dir / "walks.txt", g);
  const auto tables = RunEmbed(g, corpus, cfg);
  std::vector<std::string> files = {"config.txt"};
  for (std::size_t p = 0; p < tables.size(); ++p) {
    const std::string name = "embed_" + std::to_string(p) + ".txt";
    SaveEmbedding(tables[p], g, dir / name);
    files.push_back(name);
  }
  SaveConfig(dir, cfg);
  UpdateManifest(dir, cfg, files);
  std::cout << "embed: " << tables.size() << " tables\n";
  return kExitOk;
}

int CmdTrain(const RunConfig& cfg) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const WalkCorpus corpus = LoadCorpus(dir / "walks.txt", g);
  const auto tables = LoadTables(g, dir, corpus.paths.size());
  const Experiment exp = RunTrain(g, corpus, tables, cfg, 0);
  SaveSplit(exp.split, g, dir / "split.txt");
  SaveProjection(exp.projection, dir / "projection.txt");
  SavePrior(exp.prior, g, dir);
  SaveHistory(exp.history, dir / "history.tsv");
  SaveConfig(dir, cfg);
  std::vector<std::string> files = {"config.txt", "split.txt", "projection.txt",
                                    "prior.txt", "prior_omega.txt", "history.tsv"};
  for (std::size_t p = 0; p < exp.prior.theta.size(); ++p) {
    files.push_back("prior_theta_" + std::to_string(p) + ".txt");
  }
  UpdateManifest(dir, cfg, files);
  if (!exp.history.empty()) {
    std::cout << "train: final query loss "
              << FormatFixed4(exp.history.back().query_loss) << "\n";
  }
  return kExitOk;
}

int CmdAdapt(const RunConfig& cfg, std::size_t steps) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const Experiment exp = LoadExperiment(g, cfg, dir);
  const Predictions preds = RunAdapt(g, exp, steps, cfg);
  WriteFile(dir / "predictions.txt", SerializePredictions(preds, g));
  UpdateManifest(dir, cfg, {"predictions.txt"});
  std::cout << "adapt: " << preds.cells.size() << " query cells\n";
  return kExitOk;
}

int CmdEval(const RunConfig& cfg) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const Predictions preds = ParsePredictions(ReadFile(dir / "predictions.txt"), g);
  const RunMetrics m = Evaluate(ToScoreMatrix(preds), cfg.metrics_k);
  const std::string report = FormatReport(Summarize({m}));
  WriteFile(dir / "report.tsv", report);
  UpdateManifest(dir, cfg, {"report.tsv"});
  std::cout << report;
  return kExitOk;
}

int CmdReport(const RunConfig& cfg) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const WalkCorpus corpus = RunWalks(g, cfg);
  const auto tables = RunEmbed(g, corpus, cfg);
  const std::string report = FormatReport(RunReport(g, corpus, tables, cfg));
  SaveConfig(dir, cfg);
  WriteFile(dir / "report_repeats.tsv", report);
  UpdateManifest(dir, cfg, {"config.txt", "report_repeats.tsv"});
  std::cout << report;
  return kExitOk;
}

int CmdSweep(const RunConfig& cfg, const std::string& param,
          const std::vector<std::string>& values) {
  const Hmin g = LoadGraph(cfg);
  const fs::path dir = cfg.out;
  const std::string text = FormatSweep(RunSweep(g, cfg, param, values));
  SaveConfig(dir, cfg);
  WriteFile(dir / "sweep.tsv", text);
  UpdateManifest(dir, cfg, {"config.txt", "sweep.tsv"});
  std::cout << text;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MetaMIML: meta-learning on heterogeneous multi-instance networks"};
  app.require_subcommand(1);

  CommonFlags synth_f, walk_f, embed_f, train_f, adapt_f, eval_f, report_f, sweep_f;
  std::size_t steps = 1;
  std::optional<std::size_t> repeats;
  std::string param;
  std::vector<std::string> values;

  auto* synth = app.add_subcommand("synth", "generate a planted synthetic HMIN");
  AddCommon(synth, &synth_f, false);
  auto* walk = app.add_subcommand("walk", "sample meta-path random walks");
  AddCommon(walk, &walk_f, true);
  auto* embed = app.add_subcommand("embed", "train per-path skip-gram embeddings");
  AddCommon(embed, &embed_f, true);
  auto* train = app.add_subcommand("train", "split, project and meta-train the prior");
  AddCommon(train, &train_f, true);
  auto* adapt = app.add_subcommand("adapt", "adapt to target tasks and predict");
  AddCommon(adapt, &adapt_f, true);
  adapt->add_option("--steps", steps, "adaptation steps (0: prior only)");
  auto* eval = app.add_subcommand("eval", "score stored predictions");
  AddCommon(eval, &eval_f, true);
  auto* report = app.add_subcommand("report", "repeated seeded splits, mean and std");
  AddCommon(report, &report_f, true);
  report->add_option("--repeats", repeats, "number of repeated splits");
  auto* sweep = app.add_subcommand("sweep", "repeat the report over one config key");
  AddCommon(sweep, &sweep_f, true);
  sweep->add_option("--param", param, "config key (k means proj.k)")->required();
  sweep->add_option("--values", values, "comma separated values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--repeats", repeats, "number of repeated splits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    auto with_repeats = [&](RunConfig cfg) {
      if (repeats) cfg.repeats = *repeats;
      cfg.Check();
      return cfg;
    };
    if (*synth) {
      RunConfig cfg = Resolve(synth_f);
      cfg.synth.Check();
      return CmdSynth(cfg);
    }
    if (*walk) return CmdWalk(with_repeats(Resolve(walk_f)));
    if (*embed) return CmdEmbed(with_repeats(Resolve(embed_f)));
    if (*train) return CmdTrain(with_repeats(Resolve(train_f)));
    if (*adapt) return CmdAdapt(with_repeats(Resolve(adapt_f)), steps);
    if (*eval) return CmdEval(with_repeats(Resolve(eval_f)));
    if (*report) return CmdReport(with_repeats(Resolve(report_f)));
    if (*sweep) return CmdSweep(with_repeats(Resolve(sweep_f)), param, values);
  } catch (const HminLoadError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kConfig:
      case ErrorKind::kInvalidArgument:
        return kExitConfig;
      case ErrorKind::kData:
        return kExitData;
      case ErrorKind::kDivergence:
        return kExitDivergence;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
