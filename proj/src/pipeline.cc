#include "metamiml/pipeline.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace metamiml {

int RunConfig::EffectiveThreads() const {
  return threads > 0 ? threads : DefaultThreads();
}

void RunConfig::Check() const {
  if (paths.empty()) Fail(ErrorKind::kConfig, "at least one meta-path is required");
  if (walk_length < 1 || walks_per_node < 1 || window < 1) {
    Fail(ErrorKind::kConfig, "walk parameters must be positive");
  }
  if (proj_k < 1) {
    Fail(ErrorKind::kConfig, "proj.k must be positive");
  }
  if (!(rates.alpha > 0.0) || !(rates.beta > 0.0) || !(rates.gamma > 0.0)) {
    Fail(ErrorKind::kConfig, "meta.alpha, meta.beta and meta.gamma must be positive");
  }
  rates.Check();
  if (batch < 1 || meta_epochs < 1) {
    Fail(ErrorKind::kConfig, "meta.batch and meta.epochs must be positive");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) Fail(ErrorKind::kConfig, "episodes.ratio must lie in (0, 1)");
  if (query_labels < 1) Fail(ErrorKind::kConfig, "episodes.query_labels must be >= 1");
  if (repeats < 1) Fail(ErrorKind::kConfig, "episodes.repeats must be >= 1");
  MakeSgConfig(*this).Check();
}

namespace {

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void BadValue(const std::string& key, const std::string& value) {
  Fail(ErrorKind::kConfig, "config key '" + key + "': bad value '" + value + "'");
}

std::size_t ToSize(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  if (!ParseUint64(v, &x)) BadValue(key, v);
  return static_cast<std::size_t>(x);
}

double ToDouble(const std::string& key, const std::string& v) {
  double x = 0;
  if (!ParseDouble(v, &x)) BadValue(key, v);
  return x;
}

std::vector<std::string> SplitList(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <typename T>
KeySpec SizeKey(const std::string& key, T RunConfig::*field) {
  return {key,
          [key, field](RunConfig& c, const std::string& v) { c.*field = ToSize(key, v); },
          [field](const RunConfig& c) { return std::to_string(c.*field); }};
}

KeySpec DoubleKey(const std::string& key, double RunConfig::*field) {
  return {key,
          [key, field](RunConfig& c, const std::string& v) { c.*field = ToDouble(key, v); },
          [field](const RunConfig& c) { return FormatDouble(c.*field); }};
}

template <typename T>
KeySpec SynthSize(const std::string& key, T SynthConfig::*field) {
  return {key,
          [key, field](RunConfig& c, const std::string& v) {
            c.synth.*field = ToSize(key, v);
          },
          [field](const RunConfig& c) { return std::to_string(c.synth.*field); }};
}

KeySpec SynthDouble(const std::string& key, double SynthConfig::*field) {
  return {key,
          [key, field](RunConfig& c, const std::string& v) {
            c.synth.*field = ToDouble(key, v);
          },
          [field](const RunConfig& c) { return FormatDouble(c.synth.*field); }};
}

KeySpec RateKey(const std::string& key, double MetaRates::*field) {
  return {key,
          [key, field](RunConfig& c, const std::string& v) {
            c.rates.*field = ToDouble(key, v);
          },
          [field](const RunConfig& c) { return FormatDouble(c.rates.*field); }};
}

const std::vector<KeySpec>& Keys() {
  static const std::vector<KeySpec> keys = {
      {"graph", [](RunConfig& c, const std::string& v) { c.graph = v; },
       [](const RunConfig& c) { return c.graph; }},
      {"out", [](RunConfig& c, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         if (!ParseUint64(v, &c.seed)) BadValue("seed", v);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"paths",
       [](RunConfig& c, const std::string& v) { c.paths = SplitList(v, ','); },
       [](const RunConfig& c) {
         std::string s;
         for (const auto& p : c.paths) s += (s.empty() ? "" : ",") + p;
         return s;
       }},
      SizeKey("walk.length", &RunConfig::walk_length),
      SizeKey("walk.per_node", &RunConfig::walks_per_node),
      SizeKey("walk.window", &RunConfig::window),
      SizeKey("embed.dim", &RunConfig::embed_dim),
      SizeKey("embed.negatives", &RunConfig::negatives),
      SizeKey("embed.epochs", &RunConfig::embed_epochs),
      DoubleKey("embed.lr", &RunConfig::embed_lr),
      DoubleKey("embed.slope", &RunConfig::embed_slope),
      SizeKey("proj.k", &RunConfig::proj_k),
      {"proj.s_policy",
       [](RunConfig& c, const std::string& v) {
         if (v == "sqrt_n") c.s_policy = SparsityPolicy::kSqrtN;
         else if (v == "n_over_log_n") c.s_policy = SparsityPolicy::kNOverLogN;
         else BadValue("proj.s_policy", v);
       },
       [](const RunConfig& c) {
         return std::string(c.s_policy == SparsityPolicy::kSqrtN ? "sqrt_n"
                                                                 : "n_over_log_n");
       }},
      SizeKey("task.h1", &RunConfig::h1),
      SizeKey("task.h2", &RunConfig::h2),
      DoubleKey("task.slope", &RunConfig::task_slope),
      RateKey("meta.alpha", &MetaRates::alpha),
      RateKey("meta.beta", &MetaRates::beta),
      RateKey("meta.gamma", &MetaRates::gamma),
      SizeKey("meta.batch", &RunConfig::batch),
      SizeKey("meta.epochs", &RunConfig::meta_epochs),
      SizeKey("meta.inner_steps", &RunConfig::inner_steps),
      {"meta.attention_sign",
       [](RunConfig& c, const std::string& v) {
         if (v == "negated") c.attention_sign = AttentionSign::kNegated;
         else if (v == "literal") c.attention_sign = AttentionSign::kLiteral;
         else BadValue("meta.attention_sign", v);
       },
       [](const RunConfig& c) {
         return std::string(c.attention_sign == AttentionSign::kNegated ? "negated"
                                                                        : "literal");
       }},
      {"meta.omega_fusion",
       [](RunConfig& c, const std::string& v) {
         if (v == "fused") c.omega_fusion = OmegaFusion::kFused;
         else if (v == "product") c.omega_fusion = OmegaFusion::kProduct;
         else BadValue("meta.omega_fusion", v);
       },
       [](const RunConfig& c) {
         return std::string(c.omega_fusion == OmegaFusion::kFused ? "fused" : "product");
       }},
      DoubleKey("meta.imprint_scale", &RunConfig::imprint_scale),
      SizeKey("meta.warm_start_epochs", &RunConfig::warm_start_epochs),
      DoubleKey("meta.warm_start_lr", &RunConfig::warm_start_lr),
      DoubleKey("episodes.ratio", &RunConfig::ratio),
      SizeKey("episodes.query_labels", &RunConfig::query_labels),
      SizeKey("episodes.repeats", &RunConfig::repeats),
      SizeKey("metrics.k", &RunConfig::metrics_k),
      SynthSize("synth.bags", &SynthConfig::num_bags),
      {"synth.aux",
       [](RunConfig& c, const std::string& v) {
         c.synth.aux.clear();
         for (const auto& item : SplitList(v, ',')) {
           const auto colon = item.find(':');
           if (colon == std::string::npos) BadValue("synth.aux", v);
           c.synth.aux.push_back(
               {item.substr(0, colon), ToSize("synth.aux", item.substr(colon + 1))});
         }
       },
       [](const RunConfig& c) {
         std::string s;
         for (const auto& a : c.synth.aux) {
           s += (s.empty() ? "" : ",") + a.name + ":" + std::to_string(a.count);
         }
         return s;
       }},
      SynthSize("synth.q", &SynthConfig::q),
      SynthSize("synth.c", &SynthConfig::c),
      SynthSize("synth.d", &SynthConfig::d),
      SynthSize("synth.min_instances", &SynthConfig::min_instances),
      SynthSize("synth.max_instances", &SynthConfig::max_instances),
      SynthDouble("synth.sigma_f", &SynthConfig::sigma_f),
      SynthDouble("synth.epsilon", &SynthConfig::epsilon),
      SynthDouble("synth.label_flip", &SynthConfig::label_flip),
      SynthDouble("synth.centroid_scale", &SynthConfig::centroid_scale),
      SynthSize("synth.bag_degree", &SynthConfig::bag_degree),
      SynthSize("synth.aux_degree", &SynthConfig::aux_degree),
  };
  return keys;
}

}  // namespace

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> out;
  for (const auto& k : Keys()) out.push_back(k.key);
  return out;
}

void SetConfigValue(RunConfig* cfg, const std::string& key,
                    const std::string& value) {
  for (const auto& k : Keys()) {
    if (k.key == key) {
      k.set(*cfg, value);
      return;
    }
  }
  Fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

RunConfig ParseRunConfig(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kConfig, "config line " + std::to_string(number) +
                                   ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    SetConfigValue(&base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig LoadRunConfig(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kConfig, "cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseRunConfig(buf.str(), std::move(base));
}

std::string CanonicalConfig(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : Keys()) {
    // Locations do not change results.
    if (k.key == "graph" || k.key == "out") continue;
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::vector<MetaPath> ResolvePaths(const RunConfig& cfg, const Hmin& g) {
  std::vector<MetaPath> out;
  for (const auto& p : cfg.paths) out.push_back(ParseMetaPath(p, g));
  return out;
}

WalkConfig MakeWalkConfig(const RunConfig& cfg) {
  WalkConfig w;
  w.walk_length = cfg.walk_length;
  w.walks_per_node = cfg.walks_per_node;
  w.seed = StageSeed(cfg.seed, "walk");
  w.threads = cfg.EffectiveThreads();
  return w;
}

SgConfig MakeSgConfig(const RunConfig& cfg) {
  SgConfig s;
  s.dim = cfg.embed_dim;
  s.window = cfg.window;
  s.negatives = cfg.negatives;
  s.epochs = cfg.embed_epochs;
  s.learning_rate = cfg.embed_lr;
  s.slope = cfg.embed_slope;
  s.seed = StageSeed(cfg.seed, "embed");
  return s;
}

MetaConfig MakeMetaConfig(const RunConfig& cfg, std::size_t repeat) {
  MetaConfig m;
  m.batch_size = cfg.batch;
  m.epochs = cfg.meta_epochs;
  m.slope = cfg.task_slope;
  m.attention_sign = cfg.attention_sign;
  m.omega_fusion = cfg.omega_fusion;
  m.seed = DeriveSeed(StageSeed(cfg.seed, "meta"), repeat, 0);
  m.threads = cfg.EffectiveThreads();
  return m;
}

WarmStartOptions MakeWarmStart(const RunConfig& cfg) {
  WarmStartOptions w;
  w.imprint_scale = cfg.imprint_scale;
  w.epochs = cfg.warm_start_epochs;
  w.learning_rate = cfg.warm_start_lr;
  return w;
}

WalkCorpus RunWalks(const Hmin& g, const RunConfig& cfg) {
  return GenerateCorpus(g, ResolvePaths(cfg, g), MakeWalkConfig(cfg));
}

std::vector<EmbeddingTable> RunEmbed(const Hmin& g, const WalkCorpus& corpus,
                                     const RunConfig& cfg) {
  const SgConfig sg = MakeSgConfig(cfg);
  std::vector<EmbeddingTable> tables(corpus.paths.size());
  // Each path trains on its own seeded stream; paths run side by side.
  ParallelFor(tables.size(), cfg.EffectiveThreads(), [&](std::size_t p) {
    tables[p] = TrainSkipGram(g, corpus, static_cast<std::uint32_t>(p), sg).table;
  });
  return tables;
}

Experiment PrepareExperiment(const Hmin& g, const WalkCorpus& corpus,
                             const std::vector<EmbeddingTable>& tables,
                             const RunConfig& cfg, std::size_t repeat) {
  if (tables.size() != corpus.paths.size()) {
    Fail(ErrorKind::kData, "embedding count does not match the meta-paths");
  }
  Experiment exp;
  exp.repeat = repeat;
  exp.split = SplitSourceTarget(g, cfg.ratio,
                                DeriveSeed(StageSeed(cfg.seed, "split"), repeat, 0));
  const std::size_t u = g.instance_dim() + tables.front().dim();
  exp.projection = ProjectionMatrix::Sample(
      u, cfg.proj_k, SparsityFor(cfg.s_policy, g.num_bags()),
      DeriveSeed(StageSeed(cfg.seed, "projection"), repeat, 0));
  const std::uint64_t episode_seed =
      DeriveSeed(StageSeed(cfg.seed, "episodes"), repeat, 0);
  exp.source = BuildTasks(g, corpus, exp.split, false, cfg.query_labels,
                          episode_seed, cfg.EffectiveThreads());
  exp.target = BuildTasks(g, corpus, exp.split, true, cfg.query_labels,
                          episode_seed, cfg.EffectiveThreads());
  exp.prior.theta = tables;
  exp.prior.omega = OmegaParams::Random(
      {cfg.proj_k, cfg.EffectiveH1(), cfg.EffectiveH2(), g.num_labels()},
      DeriveSeed(StageSeed(cfg.seed, "omega"), repeat, 0));
  exp.prior.rates = cfg.rates;
  return exp;
}

Experiment RunTrain(const Hmin& g, const WalkCorpus& corpus,
                    const std::vector<EmbeddingTable>& tables,
                    const RunConfig& cfg, std::size_t repeat) {
  Experiment exp = PrepareExperiment(g, corpus, tables, cfg, repeat);
  const MetaEnv env{&g, &exp.projection};
  MetaTrainResult trained =
      MetaTrain(exp.prior, exp.source, env, MakeMetaConfig(cfg, repeat));
  exp.prior = std::move(trained.prior);
  exp.history = std::move(trained.history);
  return exp;
}

Predictions RunAdapt(const Hmin& g, const Experiment& exp, std::size_t steps,
                     const RunConfig& cfg) {
  const MetaEnv env{&g, &exp.projection};
  const MetaConfig mcfg = MakeMetaConfig(cfg, exp.repeat);
  GlobalPrior prior = exp.prior;
  if (steps > 0) {
    prior = WarmStartHeads(prior, exp.target, exp.split.target_labels, env, mcfg,
                           MakeWarmStart(cfg));
  }
  std::vector<std::vector<PredictionCell>> per_task(exp.target.size());
  ParallelFor(exp.target.size(), cfg.EffectiveThreads(), [&](std::size_t i) {
    const Task& task = exp.target[i];
    const AdaptedPrediction p = AdaptAndPredict(prior, task, steps, env, mcfg);
    for (std::size_t j = 0; j < task.query.labels.size(); ++j) {
      const LabelIndex l = task.query.labels[j];
      per_task[i].push_back({task.bag, l,
                             task.query.y[static_cast<Eigen::Index>(j)],
                             p.prediction.bag_scores[l]});
    }
  });
  Predictions preds;
  preds.steps = steps;
  for (auto& cells : per_task) {
    preds.cells.insert(preds.cells.end(), cells.begin(), cells.end());
  }
  return preds;
}

ScoreMatrix ToScoreMatrix(const Predictions& preds) {
  std::vector<NodeId> bags;
  std::vector<LabelIndex> labels;
  for (const auto& c : preds.cells) {
    bags.push_back(c.bag);
    labels.push_back(c.label);
  }
  std::sort(bags.begin(), bags.end());
  bags.erase(std::unique(bags.begin(), bags.end()), bags.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (bags.empty()) Fail(ErrorKind::kData, "no predictions to evaluate");

  ScoreMatrix s;
  const auto rows = static_cast<Eigen::Index>(bags.size());
  const auto cols = static_cast<Eigen::Index>(labels.size());
  s.scores = Matrix::Zero(rows, cols);
  s.truth = Matrix::Zero(rows, cols);
  s.mask = Matrix::Zero(rows, cols);
  for (const auto& c : preds.cells) {
    const auto r = std::lower_bound(bags.begin(), bags.end(), c.bag) - bags.begin();
    const auto col =
        std::lower_bound(labels.begin(), labels.end(), c.label) - labels.begin();
    s.scores(r, col) = c.score;
    s.truth(r, col) = c.truth;
    s.mask(r, col) = 1.0;
  }
  return s;
}

std::vector<ReportRow> RunReport(const Hmin& g, const WalkCorpus& corpus,
                                 const std::vector<EmbeddingTable>& tables,
                                 const RunConfig& cfg) {
  std::vector<RunMetrics> runs;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const Experiment exp = RunTrain(g, corpus, tables, cfg, r);
    const Predictions preds = RunAdapt(g, exp, cfg.inner_steps, cfg);
    runs.push_back(Evaluate(ToScoreMatrix(preds), cfg.metrics_k));
  }
  return Summarize(runs);
}

std::vector<SweepRow> RunSweep(const Hmin& g, const RunConfig& cfg,
                               const std::string& param,
                               const std::vector<std::string>& values) {
  const std::string key = param == "k" ? "proj.k" : param;
  if (values.empty()) Fail(ErrorKind::kConfig, "sweep needs at least one value");
  std::vector<SweepRow> out;
  for (const auto& v : values) {
    RunConfig c = cfg;
    SetConfigValue(&c, key, v);
    c.Check();
    const WalkCorpus corpus = RunWalks(g, c);
    const std::vector<EmbeddingTable> tables = RunEmbed(g, corpus, c);
    for (const auto& row : RunReport(g, corpus, tables, c)) {
      out.push_back({key, v, row});
    }
  }
  return out;
}

std::string FormatSweep(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "param\tvalue\tmetric\tmean\tstd\tn_runs\tK\texcluded_labels\n";
  for (const auto& s : rows) {
    out << s.param << "\t" << s.value << "\t" << s.row.metric << "\t"
        << FormatFixed4(s.row.mean) << "\t" << FormatFixed4(s.row.stddev) << "\t"
        << s.row.n_runs << "\t" << s.row.K << "\t" << s.row.excluded_labels << "\n";
  }
  return out.str();
}

std::string SerializePredictions(const Predictions& preds, const Hmin& g) {
  std::ostringstream out;
  out << "PRED v1 steps=" << preds.steps << " cells=" << preds.cells.size() << "\n";
  for (const auto& c : preds.cells) {
    out << g.external_id(c.bag) << " " << g.labels().at(c.label).id << " "
        << (c.truth != 0.0 ? 1 : 0) << " " << FormatDouble(c.score) << "\n";
  }
  return out.str();
}

Predictions ParsePredictions(const std::string& text, const Hmin& g) {
  std::istringstream in(text);
  std::string magic, version, f_steps, f_cells;
  in >> magic >> version >> f_steps >> f_cells;
  Predictions preds;
  std::uint64_t steps = 0, cells = 0;
  if (magic != "PRED" || version != "v1" || f_steps.rfind("steps=", 0) != 0 ||
      f_cells.rfind("cells=", 0) != 0 || !ParseUint64(f_steps.substr(6), &steps) ||
      !ParseUint64(f_cells.substr(6), &cells)) {
    Fail(ErrorKind::kData, "predictions header: expected 'PRED v1 steps=.. cells=..'");
  }
  preds.steps = steps;
  for (std::uint64_t i = 0; i < cells; ++i) {
    std::string sb, sl, st, ss;
    std::uint64_t bag = 0, label = 0;
    PredictionCell c;
    if (!(in >> sb >> sl >> st >> ss) || !ParseUint64(sb, &bag) ||
        !ParseUint64(sl, &label) || (st != "0" && st != "1") ||
        !ParseDouble(ss, &c.score)) {
      Fail(ErrorKind::kData, "predictions: malformed cell " + std::to_string(i));
    }
    const auto node = g.FindNode(bag);
    const auto l = g.FindLabel(label);
    if (!node || !l) Fail(ErrorKind::kData, "predictions: unknown bag or label");
    c.bag = *node;
    c.label = *l;
    c.truth = st == "1" ? 1.0 : 0.0;
    preds.cells.push_back(c);
  }
  return preds;
}

void SavePrior(const GlobalPrior& prior, const Hmin& g,
               const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream head;
  head << "PRIOR v1 paths=" << prior.theta.size()
       << " alpha=" << FormatDouble(prior.rates.alpha)
       << " beta=" << FormatDouble(prior.rates.beta)
       << " gamma=" << FormatDouble(prior.rates.gamma) << "\n";
  WriteFile(dir / "prior.txt", head.str());
  SaveOmega(prior.omega, dir / "prior_omega.txt");
  for (std::size_t p = 0; p < prior.theta.size(); ++p) {
    SaveEmbedding(prior.theta[p], g, dir / ("prior_theta_" + std::to_string(p) + ".txt"));
  }
}

GlobalPrior LoadPrior(const Hmin& g, const std::filesystem::path& dir) {
  std::istringstream head(ReadFile(dir / "prior.txt"));
  std::string magic, version, fp, fa, fb, fg;
  head >> magic >> version >> fp >> fa >> fb >> fg;
  GlobalPrior prior;
  std::uint64_t paths = 0;
  if (magic != "PRIOR" || version != "v1" || fp.rfind("paths=", 0) != 0 ||
      !ParseUint64(fp.substr(6), &paths) || fa.rfind("alpha=", 0) != 0 ||
      !ParseDouble(fa.substr(6), &prior.rates.alpha) ||
      fb.rfind("beta=", 0) != 0 || !ParseDouble(fb.substr(5), &prior.rates.beta) ||
      fg.rfind("gamma=", 0) != 0 || !ParseDouble(fg.substr(6), &prior.rates.gamma)) {
    Fail(ErrorKind::kData, "prior header: expected 'PRIOR v1 paths=.. alpha=.. beta=.. gamma=..'");
  }
  prior.omega = LoadOmega(dir / "prior_omega.txt");
  for (std::uint64_t p = 0; p < paths; ++p) {
    prior.theta.push_back(
        LoadEmbedding(dir / ("prior_theta_" + std::to_string(p) + ".txt"), g));
  }
  return prior;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << text;
}

void UpdateManifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::vector<std::string>& files) {
  std::map<std::string, std::string> hashes;
  const auto path = dir / "manifest.txt";
  if (std::filesystem::exists(path)) {
    std::istringstream in(ReadFile(path));
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream f(line);
      std::string tag, name, hash;
      f >> tag >> name >> hash;
      if (tag == "file" && !hash.empty()) hashes[name] = hash;
    }
  }
  for (const auto& name : files) {
    hashes[name] = HexU64(Fnv1a64(ReadFile(dir / name)));
  }
  std::ostringstream out;
  out << "MANIFEST v1\n";
  out << "config_hash " << HexU64(Fnv1a64(CanonicalConfig(cfg))) << "\n";
  out << "seed " << cfg.seed << "\n";
  for (const auto& [name, hash] : hashes) out << "file " << name << " " << hash << "\n";
  WriteFile(path, out.str());
}

}  // namespace metamiml
