#include "metamiml/meta.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace metamiml {

void MetaRates::Check() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0) ||
      !std::isfinite(alpha + beta + gamma)) {
    Fail(ErrorKind::kConfig, "learning rates must be finite and non-negative");
  }
}

ThetaRow LocalUpdateTheta(const EmbeddingTable& table, NodeId bag,
                          const Matrix& grad_projected, std::size_t instance_dim,
                          const ProjectionMatrix& E, double alpha) {
  if (bag >= static_cast<NodeId>(table.W.rows())) {
    Fail(ErrorKind::kInvalidArgument, "bag row outside the embedding table");
  }
  const BagContext ctx = ComputeBagContext(table, bag);
  const Vector dctx = ContextGradient(grad_projected, instance_dim, E);
  if (dctx.size() != ctx.gate.size()) {
    Fail(ErrorKind::kInvalidArgument,
         "context gradient has length " + std::to_string(dctx.size()) +
             ", embedding dimension is " + std::to_string(ctx.gate.size()));
  }
  const Vector step = alpha * dctx.cwiseProduct(ctx.gate);
  ThetaRow row;
  row.w = table.W.row(bag).transpose() - step;
  row.b = table.b - step;
  return row;
}

BagContext ContextFromRow(const ThetaRow& row, double slope) {
  BagContext ctx;
  const Vector pre = row.w + row.b;
  ctx.value.resize(pre.size());
  ctx.gate.resize(pre.size());
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    ctx.value[i] = LeakyRelu(pre[i], slope);
    ctx.gate[i] = LeakyReluGrad(pre[i], slope);
  }
  return ctx;
}

Vector AttentionWeights(const Vector& losses, AttentionSign sign) {
  if (losses.size() == 0) Fail(ErrorKind::kInvalidArgument, "attention over no paths");
  if (!losses.allFinite()) {
    Fail(ErrorKind::kDivergence, "attention input contains a non-finite loss");
  }
  return Softmax(sign == AttentionSign::kNegated ? Vector(-losses) : losses);
}

double AttentionEntropy(const Vector& weights) {
  double h = 0.0;
  for (double a : weights) {
    if (a > 0.0) h -= a * std::log(a);
  }
  return h;
}

namespace {

const Hmin& GraphOf(const MetaEnv& env) {
  if (!env.graph || !env.projection) {
    Fail(ErrorKind::kInvalidArgument, "meta environment is incomplete");
  }
  return *env.graph;
}

void CheckPrior(const GlobalPrior& prior) {
  if (prior.theta.empty()) Fail(ErrorKind::kInvalidArgument, "prior has no meta-paths");
  prior.rates.Check();
}

[[noreturn]] void Diverged(const Hmin& g, NodeId bag, const std::string& what) {
  Fail(ErrorKind::kDivergence, "non-finite " + what + " on task (bag " +
                                   std::to_string(g.external_id(bag)) + ")");
}

// Per-path contexts and support losses at the prior.
struct PriorPaths {
  std::vector<BagContext> contexts;
  std::vector<Matrix> projected;
  std::vector<Matrix> grad_projected;
  Vector losses;
};

PriorPaths EvaluatePrior(const GlobalPrior& prior, const Task& task,
                         const MetaEnv& env, const MetaConfig& cfg,
                         bool with_gradients) {
  const Hmin& g = GraphOf(env);
  const Bag& bag = g.bag(task.bag);
  const std::size_t P = prior.theta.size();
  PriorPaths out;
  out.losses.resize(static_cast<Eigen::Index>(P));
  for (std::size_t p = 0; p < P; ++p) {
    BagContext ctx = ComputeBagContext(prior.theta[p], task.bag);
    Matrix x = ProjectInstances(bag.instances, ctx.value, *env.projection);
    if (with_gradients) {
      TaskLossResult r = TaskLoss(prior.omega, x, task.support.labels,
                                  task.support.y, cfg.slope);
      out.losses[static_cast<Eigen::Index>(p)] = r.loss;
      out.grad_projected.push_back(std::move(r.grad_input));
    } else {
      out.losses[static_cast<Eigen::Index>(p)] = TaskLossValue(
          prior.omega, x, task.support.labels, task.support.y, cfg.slope);
    }
    if (!std::isfinite(out.losses[static_cast<Eigen::Index>(p)])) {
      Diverged(g, task.bag, "support loss");
    }
    out.contexts.push_back(std::move(ctx));
    out.projected.push_back(std::move(x));
  }
  return out;
}

Matrix Fuse(const std::vector<Matrix>& parts, const Vector& a) {
  Matrix fused = Matrix::Zero(parts.front().rows(), parts.front().cols());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    fused += a[static_cast<Eigen::Index>(p)] * parts[p];
  }
  return fused;
}

// Everything one task contributes to the outer update.
struct TaskGradient {
  NodeId bag = 0;
  double support_loss = 0.0;
  double query_loss = 0.0;
  double entropy = 0.0;
  Vector omega_grad;
  std::vector<Vector> theta_grad;  // per path; applies to W[bag] and b
};

TaskGradient ComputeTaskGradient(const GlobalPrior& prior, const Task& task,
                                 const MetaEnv& env, const MetaConfig& cfg) {
  const Hmin& g = GraphOf(env);
  const TaskAdaptation ad = InnerAdapt(prior, task, env, cfg);
  TaskLossResult q = TaskLoss(ad.omega_combined, ad.fused, task.query.labels,
                              task.query.y, cfg.slope);
  if (!std::isfinite(q.loss)) Diverged(g, task.bag, "query loss");

  TaskGradient out;
  out.bag = task.bag;
  out.support_loss = ad.support_loss_before;
  out.query_loss = q.loss;
  out.entropy = AttentionEntropy(ad.attention);
  out.omega_grad = std::move(q.grad_omega.flat());
  const std::size_t d = g.instance_dim();
  for (std::size_t p = 0; p < prior.theta.size(); ++p) {
    const double a = ad.attention[static_cast<Eigen::Index>(p)];
    const Vector dctx = ContextGradient(a * q.grad_input, d, *env.projection);
    out.theta_grad.push_back(dctx.cwiseProduct(ad.contexts[p].gate));
  }
  return out;
}

void ApplyOuterUpdate(GlobalPrior* prior, const std::vector<TaskGradient>& grads,
                      std::size_t begin, std::size_t end) {
  const double scale = prior->rates.gamma / static_cast<double>(end - begin);
  Vector omega_sum = Vector::Zero(prior->omega.flat().size());
  const std::size_t P = prior->theta.size();
  std::vector<std::map<NodeId, Vector>> rows(P);
  std::vector<Vector> bias(P);
  for (std::size_t p = 0; p < P; ++p) {
    bias[p] = Vector::Zero(prior->theta[p].b.size());
  }
  for (std::size_t i = begin; i < end; ++i) {
    omega_sum += grads[i].omega_grad;
    for (std::size_t p = 0; p < P; ++p) {
      auto [it, fresh] = rows[p].try_emplace(grads[i].bag, grads[i].theta_grad[p]);
      if (!fresh) it->second += grads[i].theta_grad[p];
      bias[p] += grads[i].theta_grad[p];
    }
  }
  prior->omega.flat() -= scale * omega_sum;
  for (std::size_t p = 0; p < P; ++p) {
    for (const auto& [bag, grad] : rows[p]) {
      prior->theta[p].W.row(bag) -= scale * grad.transpose();
    }
    prior->theta[p].b -= scale * bias[p];
  }
}

bool PriorFinite(const GlobalPrior& prior) {
  if (!prior.omega.AllFinite()) return false;
  for (const auto& t : prior.theta) {
    if (!t.W.allFinite() || !t.b.allFinite()) return false;
  }
  return true;
}

}  // namespace

TaskAdaptation InnerAdapt(const GlobalPrior& prior, const Task& task,
                          const MetaEnv& env, const MetaConfig& cfg) {
  CheckPrior(prior);
  const Hmin& g = GraphOf(env);
  const std::size_t P = prior.theta.size();
  const std::size_t d = g.instance_dim();
  const Bag& bag = g.bag(task.bag);

  PriorPaths at_prior = EvaluatePrior(prior, task, env, cfg, true);
  TaskAdaptation ad;
  ad.path_losses = at_prior.losses;
  for (std::size_t p = 0; p < P; ++p) {
    ThetaRow row = LocalUpdateTheta(prior.theta[p], task.bag,
                                    at_prior.grad_projected[p], d,
                                    *env.projection, prior.rates.alpha);
    BagContext ctx = ContextFromRow(row, prior.theta[p].slope);
    ad.projected.push_back(ProjectInstances(bag.instances, ctx.value, *env.projection));
    ad.theta.push_back(std::move(row));
    ad.contexts.push_back(std::move(ctx));
  }
  ad.attention = AttentionWeights(ad.path_losses, cfg.attention_sign);

  // Every omega_i^p still equals omega here, so their convex combination is
  // omega itself.
  ad.omega_fused = prior.omega;
  ad.fused = Fuse(ad.projected, ad.attention);

  // The gradient at the pre-update omega_i^p (= omega) is shared by all paths.
  TaskLossResult s = TaskLoss(prior.omega, ad.fused, task.support.labels,
                              task.support.y, cfg.slope);
  if (!std::isfinite(s.loss)) Diverged(g, task.bag, "support loss");
  ad.support_loss_before = TaskLossValue(ad.omega_fused, ad.fused,
                                         task.support.labels, task.support.y,
                                         cfg.slope);
  const OmegaParams base = cfg.omega_fusion == OmegaFusion::kFused
                               ? ad.omega_fused
                               : prior.omega.ElementwiseProduct(ad.omega_fused);
  Vector combined = Vector::Zero(prior.omega.flat().size());
  for (std::size_t p = 0; p < P; ++p) {
    OmegaParams w(prior.omega.shape(),
                  Vector(base.flat() - prior.rates.beta * s.grad_omega.flat()));
    combined += ad.attention[static_cast<Eigen::Index>(p)] * w.flat();
    ad.omega_paths.push_back(std::move(w));
  }
  ad.omega_combined = OmegaParams(prior.omega.shape(), std::move(combined));
  ad.support_loss_after = TaskLossValue(ad.omega_combined, ad.fused,
                                        task.support.labels, task.support.y,
                                        cfg.slope);
  if (!std::isfinite(ad.support_loss_after) || !ad.omega_combined.AllFinite()) {
    Diverged(g, task.bag, "adapted parameters");
  }
  return ad;
}

MetaTrainResult MetaTrain(const GlobalPrior& prior,
                          const std::vector<Task>& tasks, const MetaEnv& env,
                          const MetaConfig& cfg) {
  CheckPrior(prior);
  const Hmin& g = GraphOf(env);
  if (tasks.empty()) Fail(ErrorKind::kData, "meta-training needs at least one task");
  if (cfg.batch_size < 1) Fail(ErrorKind::kConfig, "batch size must be >= 1");

  MetaTrainResult result;
  result.prior = prior;
  std::vector<std::size_t> order(tasks.size());
  std::vector<TaskGradient> grads(tasks.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(DeriveSeed(cfg.seed, epoch, 0x4d45'5441ULL));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const GlobalPrior& snapshot = result.prior;
      ParallelFor(end - begin, cfg.threads, [&](std::size_t i) {
        grads[begin + i] =
            ComputeTaskGradient(snapshot, tasks[order[begin + i]], env, cfg);
      });
      double batch_query = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        rec.support_loss += grads[i].support_loss;
        rec.query_loss += grads[i].query_loss;
        rec.attention_entropy += grads[i].entropy;
        batch_query += grads[i].query_loss;
      }
      ApplyOuterUpdate(&result.prior, grads, begin, end);
      if (!PriorFinite(result.prior)) {
        Diverged(g, grads[begin].bag, "prior after the outer update");
      }
      if (cfg.track_steps) {
        std::vector<Task> batch;
        for (std::size_t i = begin; i < end; ++i) batch.push_back(tasks[order[i]]);
        StepRecord step;
        step.epoch = epoch;
        step.query_before = batch_query / static_cast<double>(end - begin);
        step.query_after = MeanQueryLoss(result.prior, batch, env, cfg);
        result.steps.push_back(step);
      }
    }
    const double n = static_cast<double>(tasks.size());
    rec.support_loss /= n;
    rec.query_loss /= n;
    rec.attention_entropy /= n;
    result.history.push_back(rec);
  }
  return result;
}

double MeanQueryLoss(const GlobalPrior& prior, const std::vector<Task>& tasks,
                     const MetaEnv& env, const MetaConfig& cfg) {
  if (tasks.empty()) return 0.0;
  std::vector<double> losses(tasks.size());
  ParallelFor(tasks.size(), cfg.threads, [&](std::size_t i) {
    const TaskAdaptation ad = InnerAdapt(prior, tasks[i], env, cfg);
    losses[i] = TaskLossValue(ad.omega_combined, ad.fused, tasks[i].query.labels,
                              tasks[i].query.y, cfg.slope);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(tasks.size());
}

AdaptedPrediction AdaptAndPredict(const GlobalPrior& prior, const Task& task,
                                  std::size_t steps, const MetaEnv& env,
                                  const MetaConfig& cfg) {
  CheckPrior(prior);
  AdaptedPrediction out;
  if (steps == 0) {
    const PriorPaths at_prior = EvaluatePrior(prior, task, env, cfg, false);
    out.attention = AttentionWeights(at_prior.losses, cfg.attention_sign);
    const Matrix fused = Fuse(at_prior.projected, out.attention);
    out.prediction = Forward(prior.omega, fused, cfg.slope);
    out.support_loss_before = out.support_loss_after = TaskLossValue(
        prior.omega, fused, task.support.labels, task.support.y, cfg.slope);
    return out;
  }
  const TaskAdaptation ad = InnerAdapt(prior, task, env, cfg);
  OmegaParams omega = ad.omega_combined;
  for (std::size_t s = 1; s < steps; ++s) {
    const TaskLossResult r = TaskLoss(omega, ad.fused, task.support.labels,
                                      task.support.y, cfg.slope);
    omega.flat() -= prior.rates.beta * r.grad_omega.flat();
  }
  if (!omega.AllFinite()) Diverged(GraphOf(env), task.bag, "adapted omega");
  out.attention = ad.attention;
  out.support_loss_before = ad.support_loss_before;
  out.support_loss_after = TaskLossValue(omega, ad.fused, task.support.labels,
                                         task.support.y, cfg.slope);
  out.prediction = Forward(omega, ad.fused, cfg.slope);
  return out;
}

GlobalPrior WarmStartHeads(const GlobalPrior& prior,
                           const std::vector<Task>& tasks,
                           const std::vector<LabelIndex>& labels,
                           const MetaEnv& env, const MetaConfig& cfg,
                           const WarmStartOptions& options) {
  CheckPrior(prior);
  GlobalPrior out = prior;
  if (tasks.empty() || labels.empty()) return out;

  // Contexts stay at the prior, so the fused inputs are fixed.
  std::vector<Matrix> inputs(tasks.size());
  ParallelFor(tasks.size(), cfg.threads, [&](std::size_t i) {
    const PriorPaths at_prior = EvaluatePrior(prior, tasks[i], env, cfg, false);
    inputs[i] = Fuse(at_prior.projected,
                     AttentionWeights(at_prior.losses, cfg.attention_sign));
  });

  if (options.imprint_scale > 0.0) {
    std::vector<Vector> pooled(tasks.size());
    ParallelFor(tasks.size(), cfg.threads, [&](std::size_t i) {
      pooled[i] = Forward(prior.omega, inputs[i], cfg.slope).pooled.value;
    });
    const auto h2 = static_cast<Eigen::Index>(prior.omega.shape().h2);
    for (LabelIndex l : labels) {
      Vector pos = Vector::Zero(h2), neg = Vector::Zero(h2);
      double n_pos = 0, n_neg = 0;
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto& side = tasks[i].support;
        const auto it = std::find(side.labels.begin(), side.labels.end(), l);
        if (it == side.labels.end()) continue;
        if (side.y[it - side.labels.begin()] != 0.0) {
          pos += pooled[i];
          n_pos += 1;
        } else {
          neg += pooled[i];
          n_neg += 1;
        }
      }
      if (n_pos == 0 || n_neg == 0) continue;
      pos /= n_pos;
      neg /= n_neg;
      const Vector dir = pos - neg;
      const double norm = dir.norm();
      if (!(norm > 0.0)) continue;
      const Vector w = options.imprint_scale * dir / norm;
      const double b = -w.dot(0.5 * (pos + neg));
      out.omega.Wb().row(l) = w.transpose();
      out.omega.bb()[l] = b;
      out.omega.Wi().row(l) = w.transpose();
      out.omega.bi()[l] = b;
    }
  }

  std::vector<std::size_t> coords;
  for (LabelIndex l : labels) {
    const auto idx = prior.omega.HeadIndices(l);
    coords.insert(coords.end(), idx.begin(), idx.end());
  }
  std::sort(coords.begin(), coords.end());
  std::vector<Vector> grads(tasks.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    ParallelFor(tasks.size(), cfg.threads, [&](std::size_t i) {
      grads[i] = TaskLoss(out.omega, inputs[i], tasks[i].support.labels,
                          tasks[i].support.y, cfg.slope)
                     .grad_omega.flat();
    });
    Vector sum = Vector::Zero(out.omega.flat().size());
    for (const auto& gr : grads) sum += gr;
    const double scale = options.learning_rate / static_cast<double>(tasks.size());
    for (std::size_t c : coords) {
      out.omega.flat()[static_cast<Eigen::Index>(c)] -=
          scale * sum[static_cast<Eigen::Index>(c)];
    }
    if (!out.omega.AllFinite()) {
      Fail(ErrorKind::kDivergence, "head warm start diverged at pass " +
                                       std::to_string(epoch + 1));
    }
  }
  return out;
}

std::string FormatHistory(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch\tsupport_loss\tquery_loss\tattention_entropy\n";
  for (const auto& r : history) {
    out << r.epoch << "\t" << FormatDouble(r.support_loss) << "\t"
        << FormatDouble(r.query_loss) << "\t"
        << FormatDouble(r.attention_entropy) << "\n";
  }
  return out.str();
}

void SaveHistory(const std::vector<EpochRecord>& history,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << FormatHistory(history);
}

}  // namespace metamiml
