#include <cmath>

#include "doctest.h"
#include "metamiml/meta.h"
#include "metamiml/pipeline.h"

using namespace metamiml;

namespace {

RunConfig SmallConfig() {
  RunConfig cfg;
  cfg.threads = 1;
  cfg.synth.num_bags = 30;
  cfg.synth.aux = {{"D", 20}, {"M", 20}};
  cfg.synth.q = 10;
  cfg.synth.c = 2;
  cfg.synth.d = 10;
  cfg.synth.min_instances = 3;
  cfg.synth.max_instances = 5;
  cfg.synth.seed = 5;
  cfg.walk_length = 10;
  cfg.walks_per_node = 4;
  cfg.embed_dim = 6;
  cfg.embed_epochs = 2;
  cfg.proj_k = 10;
  cfg.meta_epochs = 3;
  cfg.batch = 8;
  cfg.query_labels = 1;
  return cfg;
}

struct Fixture {
  RunConfig cfg = SmallConfig();
  Hmin g;
  WalkCorpus corpus;
  std::vector<EmbeddingTable> tables;
  Experiment exp;

  explicit Fixture(RunConfig c = SmallConfig()) : cfg(std::move(c)) {
    g = GenerateSynthetic(cfg.synth).graph;
    corpus = RunWalks(g, cfg);
    tables = RunEmbed(g, corpus, cfg);
    exp = PrepareExperiment(g, corpus, tables, cfg, 0);
  }
  MetaEnv env() const { return {&g, &exp.projection}; }
  MetaConfig meta() const { return MakeMetaConfig(cfg, 0); }
};

}  // namespace

TEST_CASE("attention weights") {
  Vector eq = Vector::Constant(3, 0.7);
  const Vector a = AttentionWeights(eq);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Vector two(2);
  two << 0.1, 2.3;
  const Vector b = AttentionWeights(two);
  const double e = std::exp(-2.2);
  CHECK(std::abs(b[0] - 1.0 / (1.0 + e)) < 1e-15);
  CHECK(std::abs(b[0] - 0.900) <= 0.001);
  CHECK(std::abs(b[1] - 0.100) <= 0.001);

  const Vector lit = AttentionWeights(two, AttentionSign::kLiteral);
  CHECK(lit[1] == doctest::Approx(b[0]));

  CHECK(AttentionWeights(Vector::Constant(1, 5.0))[0] == 1.0);
  CHECK_THROWS_AS(AttentionWeights(Vector()), Error);
  Vector bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(AttentionWeights(bad), Error);

  CHECK(AttentionEntropy(a) == doctest::Approx(std::log(3.0)));
  CHECK(AttentionEntropy(Vector::Constant(1, 1.0)) == 0.0);
}

TEST_CASE("attention is a simplex and decreases in its own loss") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    Vector l(4);
    for (int i = 0; i < 4; ++i) l[i] = u(rng);
    const Vector a = AttentionWeights(l);
    CHECK(a.minCoeff() > 0.0);
    CHECK(std::abs(a.sum() - 1.0) < 1e-12);
    Vector up = l;
    up[2] += 0.5;
    CHECK(AttentionWeights(up)[2] < a[2]);
  }
}

TEST_CASE("local theta update on a scalar chain") {
  // d = 0 instance features, d_l = k = 1, identity projection, loss (x - 2)^2.
  const ProjectionMatrix E =
      ProjectionMatrix::FromEntries(1, 1, 1.0, 1.0, {{0, 0, 1}});
  for (double w0 : {0.7, -0.4}) {
    EmbeddingTable t;
    t.W = RowMatrix::Constant(2, 1, 0.0);
    t.W(1, 0) = w0;
    t.C = RowMatrix::Zero(2, 1);
    t.b = Vector::Constant(1, 0.1);
    t.slope = 0.01;
    const BagContext x = ComputeBagContext(t, 1);
    const double xhat = x.value[0];
    Matrix grad(1, 1);
    grad(0, 0) = 2.0 * (xhat - 2.0);
    const double alpha = 0.05;
    const ThetaRow r = LocalUpdateTheta(t, 1, grad, 0, E, alpha);
    const double gate = (w0 + 0.1) >= 0.0 ? 1.0 : 0.01;
    CHECK(std::abs(r.w[0] - (w0 - alpha * 2.0 * (xhat - 2.0) * gate)) < 1e-10);
    CHECK(std::abs(r.b[0] - (0.1 - alpha * 2.0 * (xhat - 2.0) * gate)) < 1e-10);

    const ThetaRow still = LocalUpdateTheta(t, 1, grad, 0, E, 0.0);
    CHECK(still.w == t.W.row(1).transpose());
    CHECK(still.b == t.b);
    const ThetaRow flat = LocalUpdateTheta(t, 1, Matrix::Zero(1, 1), 0, E, alpha);
    CHECK(flat.w == t.W.row(1).transpose());
    CHECK(flat.b == t.b);
  }
}

TEST_CASE("inner adaptation structure") {
  Fixture f;
  const MetaConfig mc = f.meta();
  const Task& task = f.exp.source.front();
  const TaskAdaptation ad = InnerAdapt(f.exp.prior, task, f.env(), mc);
  const std::size_t P = f.exp.prior.theta.size();
  CHECK(ad.theta.size() == P);
  CHECK(ad.projected.size() == P);
  CHECK(ad.omega_paths.size() == P);
  CHECK(std::abs(ad.attention.sum() - 1.0) < 1e-12);
  CHECK(ad.attention.minCoeff() > 0.0);
  CHECK(ad.omega_fused == f.exp.prior.omega);
  CHECK(ad.fused.rows() == f.g.bag(task.bag).instances.rows());
  CHECK(ad.fused.cols() == static_cast<Eigen::Index>(f.cfg.proj_k));
  Matrix expect = Matrix::Zero(ad.fused.rows(), ad.fused.cols());
  for (std::size_t p = 0; p < P; ++p) expect += ad.attention[static_cast<Eigen::Index>(p)] * ad.projected[p];
  CHECK((expect - ad.fused).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fusion fixed point with one path and unit weights") {
  Fixture f;
  GlobalPrior prior = f.exp.prior;
  prior.theta.resize(1);
  prior.omega.flat().setOnes();
  prior.rates.beta = 0.0;
  MetaConfig mc = f.meta();
  mc.omega_fusion = OmegaFusion::kProduct;
  const TaskAdaptation ad = InnerAdapt(prior, f.exp.source.front(), f.env(), mc);
  CHECK(ad.attention.size() == 1);
  CHECK(ad.attention[0] == 1.0);
  CHECK(ad.omega_fused == prior.omega);
  CHECK(ad.omega_paths[0] == prior.omega);
  CHECK(ad.fused == ad.projected[0]);
}

TEST_CASE("identical paths fuse to either path") {
  Fixture f;
  GlobalPrior prior = f.exp.prior;
  prior.theta = {prior.theta[0], prior.theta[0]};
  const TaskAdaptation ad = InnerAdapt(prior, f.exp.source[1], f.env(), f.meta());
  CHECK(ad.attention[0] == ad.attention[1]);
  CHECK((ad.fused - ad.projected[0]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ad.projected[0] == ad.projected[1]);
}

TEST_CASE("one inner step lowers the support loss on most tasks") {
  RunConfig cfg = SmallConfig();
  cfg.synth.num_bags = 70;
  cfg.ratio = 0.8;
  cfg.rates.beta = 1e-3;
  Fixture f(cfg);
  REQUIRE(f.exp.source.size() >= 50);
  int ok = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const TaskAdaptation ad = InnerAdapt(f.exp.prior, f.exp.source[i], f.env(), f.meta());
    if (ad.support_loss_after <= ad.support_loss_before) ++ok;
  }
  CHECK(ok >= 45);
}

TEST_CASE("zero outer rate leaves the prior untouched") {
  Fixture f;
  GlobalPrior prior = f.exp.prior;
  prior.rates.gamma = 0.0;
  const MetaTrainResult r = MetaTrain(prior, f.exp.source, f.env(), f.meta());
  CHECK(r.prior == prior);
  CHECK(r.history.size() == f.cfg.meta_epochs);
}

TEST_CASE("meta-training is deterministic across thread counts") {
  Fixture f;
  MetaConfig mc = f.meta();
  const MetaTrainResult a = MetaTrain(f.exp.prior, f.exp.source, f.env(), mc);
  const MetaTrainResult b = MetaTrain(f.exp.prior, f.exp.source, f.env(), mc);
  mc.threads = 4;
  const MetaTrainResult c = MetaTrain(f.exp.prior, f.exp.source, f.env(), mc);
  CHECK(a.prior == b.prior);
  CHECK(a.prior == c.prior);
  CHECK(FormatHistory(a.history) == FormatHistory(c.history));
  CHECK_FALSE(a.prior == f.exp.prior);
}

TEST_CASE("query loss falls over 20 epochs on the default synthetic network") {
  RunConfig cfg;
  cfg.threads = 0;
  cfg.synth.seed = StageSeed(cfg.seed, "synth");
  const Hmin g = GenerateSynthetic(cfg.synth).graph;
  const WalkCorpus corpus = RunWalks(g, cfg);
  const auto tables = RunEmbed(g, corpus, cfg);
  const Experiment e = RunTrain(g, corpus, tables, cfg, 0);
  REQUIRE(e.history.size() == 20);
  CHECK(e.history.back().query_loss < e.history.front().query_loss);
}

TEST_CASE("step tracking records one entry per batch") {
  Fixture f;
  MetaConfig mc = f.meta();
  mc.track_steps = true;
  mc.epochs = 2;
  const MetaTrainResult r = MetaTrain(f.exp.prior, f.exp.source, f.env(), mc);
  const std::size_t batches = (f.exp.source.size() + mc.batch_size - 1) / mc.batch_size;
  CHECK(r.steps.size() == 2 * batches);
  for (const StepRecord& s : r.steps) {
    CHECK(std::isfinite(s.query_before));
    CHECK(std::isfinite(s.query_after));
  }
}

TEST_CASE("prediction without steps is the fused prior forward") {
  Fixture f;
  const MetaConfig mc = f.meta();
  const Task& task = f.exp.target.front();
  const AdaptedPrediction p = AdaptAndPredict(f.exp.prior, task, 0, f.env(), mc);

  // Independent recomputation from the public pieces.
  const std::size_t P = f.exp.prior.theta.size();
  std::vector<Matrix> xs;
  Vector losses(static_cast<Eigen::Index>(P));
  for (std::size_t q = 0; q < P; ++q) {
    const BagContext ctx = ComputeBagContext(f.exp.prior.theta[q], task.bag);
    xs.push_back(ProjectInstances(f.g.bag(task.bag).instances, ctx.value, f.exp.projection));
    losses[static_cast<Eigen::Index>(q)] =
        TaskLossValue(f.exp.prior.omega, xs.back(), task.support.labels, task.support.y, mc.slope);
  }
  const Vector a = AttentionWeights(losses);
  Matrix fused = Matrix::Zero(xs[0].rows(), xs[0].cols());
  for (std::size_t q = 0; q < P; ++q) fused += a[static_cast<Eigen::Index>(q)] * xs[q];
  const TaskPrediction expect = Forward(f.exp.prior.omega, fused, mc.slope);
  CHECK(p.prediction.bag_scores == expect.bag_scores);
  CHECK(p.prediction.instance_scores == expect.instance_scores);
}

TEST_CASE("one adaptation step lowers the target support loss") {
  RunConfig cfg = SmallConfig();
  cfg.synth.num_bags = 120;
  cfg.ratio = 0.5;
  cfg.rates.beta = 1e-3;
  Fixture f(cfg);
  REQUIRE(f.exp.target.size() >= 50);
  int ok = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const AdaptedPrediction p = AdaptAndPredict(f.exp.prior, f.exp.target[i], 1, f.env(), f.meta());
    if (p.support_loss_after <= p.support_loss_before) ++ok;
  }
  CHECK(ok >= 45);
  // More steps keep descending on the same task.
  const AdaptedPrediction one = AdaptAndPredict(f.exp.prior, f.exp.target[0], 1, f.env(), f.meta());
  const AdaptedPrediction five = AdaptAndPredict(f.exp.prior, f.exp.target[0], 5, f.env(), f.meta());
  CHECK(five.support_loss_after <= one.support_loss_after);
}

TEST_CASE("head warm start only touches the requested labels") {
  Fixture f;
  const std::vector<LabelIndex> labels = f.exp.split.target_labels;
  WarmStartOptions opt;
  opt.epochs = 5;
  const GlobalPrior warm =
      WarmStartHeads(f.exp.prior, f.exp.target, labels, f.env(), f.meta(), opt);
  std::vector<bool> head(f.exp.prior.omega.flat().size(), false);
  for (LabelIndex l : labels) {
    for (std::size_t i : f.exp.prior.omega.HeadIndices(l)) head[i] = true;
  }
  bool moved = false;
  for (std::size_t i = 0; i < head.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    if (!head[i]) {
      CHECK(warm.omega.flat()[j] == f.exp.prior.omega.flat()[j]);
    } else if (warm.omega.flat()[j] != f.exp.prior.omega.flat()[j]) {
      moved = true;
    }
  }
  CHECK(moved);
  CHECK(warm.theta == f.exp.prior.theta);

  WarmStartOptions none;
  none.imprint_scale = 0.0;
  none.epochs = 0;
  CHECK(WarmStartHeads(f.exp.prior, f.exp.target, labels, f.env(), f.meta(), none) ==
        f.exp.prior);
}

TEST_CASE("imprinted heads separate support bags") {
  Fixture f;
  const std::vector<LabelIndex> labels = f.exp.split.target_labels;
  WarmStartOptions opt;
  opt.imprint_scale = 4.0;
  const GlobalPrior warm =
      WarmStartHeads(f.exp.prior, f.exp.target, labels, f.env(), f.meta(), opt);
  for (LabelIndex l : labels) {
    // Labels lacking a positive or negative support bag keep their prior row.
    const double norm = warm.omega.Wb().row(l).norm();
    const bool kept = warm.omega.Wb().row(l) == f.exp.prior.omega.Wb().row(l);
    CHECK((norm == doctest::Approx(4.0) || kept));
    if (!kept) CHECK(warm.omega.Wi().row(l) == warm.omega.Wb().row(l));
  }
}

TEST_CASE("history format and guards") {
  std::vector<EpochRecord> h = {{1, 0.5, 0.25, 1.0}, {2, 0.125, 0.1, 0.9}};
  const std::string text = FormatHistory(h);
  CHECK(text.rfind("epoch\tsupport_loss\tquery_loss\tattention_entropy\n", 0) == 0);
  CHECK(text.find("2\t0.125\t0.1\t0.9\n") != std::string::npos);

  MetaRates bad;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.Check(), Error);

  Fixture f;
  CHECK_THROWS_AS(MetaTrain(f.exp.prior, {}, f.env(), f.meta()), Error);
  CHECK_THROWS_AS(InnerAdapt(f.exp.prior, f.exp.source[0], MetaEnv{}, f.meta()), Error);
}

TEST_CASE("runaway rates trip the divergence guard") {
  Fixture f;
  GlobalPrior prior = f.exp.prior;
  prior.rates.alpha = 1e300;
  prior.rates.beta = 1e300;
  prior.rates.gamma = 1e300;
  try {
    MetaTrain(prior, f.exp.source, f.env(), f.meta());
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDivergence);
  }
}
