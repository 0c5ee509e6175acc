#include "metamiml/tasklearner.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metamiml/skipgram.h"

namespace metamiml {

std::size_t OmegaShape::size() const {
  return h1 * k + h1 + h2 * h1 + h2 + 2 * (q * h2 + q);
}

OmegaParams::OmegaParams(const OmegaShape& shape)
    : shape_(shape),
      flat_(Vector::Zero(static_cast<Eigen::Index>(shape.size()))) {}

OmegaParams::OmegaParams(const OmegaShape& shape, Vector flat)
    : shape_(shape), flat_(std::move(flat)) {
  if (static_cast<std::size_t>(flat_.size()) != shape_.size()) {
    Fail(ErrorKind::kInvalidArgument, "omega flat vector has wrong length");
  }
}

OmegaParams OmegaParams::Random(const OmegaShape& shape, std::uint64_t seed) {
  if (shape.k == 0 || shape.h1 == 0 || shape.h2 == 0 || shape.q == 0) {
    Fail(ErrorKind::kConfig, "task learner widths must be positive");
  }
  OmegaParams p(shape);
  Rng rng(seed);
  auto fill = [&rng](auto m) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
    }
  };
  fill(p.W1());
  fill(p.W2());
  fill(p.Wi());
  fill(p.Wb());
  return p;
}

std::vector<std::size_t> OmegaParams::HeadIndices(LabelIndex label) const {
  if (label >= shape_.q) {
    Fail(ErrorKind::kInvalidArgument, "label index out of range");
  }
  std::vector<std::size_t> out;
  for (std::size_t base : {off_Wi(), off_Wb()}) {
    for (std::size_t j = 0; j < shape_.h2; ++j) {
      out.push_back(base + label * shape_.h2 + j);
    }
  }
  out.push_back(off_bi() + label);
  out.push_back(off_bb() + label);
  std::sort(out.begin(), out.end());
  return out;
}

OmegaParams OmegaParams::ElementwiseProduct(const OmegaParams& other) const {
  if (!(shape_ == other.shape_)) {
    Fail(ErrorKind::kInvalidArgument, "elementwise product of unequal shapes");
  }
  return OmegaParams(shape_, flat_.cwiseProduct(other.flat_));
}

bool OmegaParams::operator==(const OmegaParams& other) const {
  return shape_ == other.shape_ && flat_.size() == other.flat_.size() &&
         flat_ == other.flat_;
}

ColumnMax MaxPoolColumns(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    Fail(ErrorKind::kInvalidArgument, "max pooling over an empty matrix");
  }
  ColumnMax out;
  out.value.resize(m.cols());
  out.argmax.resize(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < m.rows(); ++r) {
      if (m(r, c) > m(best, c)) best = r;
    }
    out.value[c] = m(best, c);
    out.argmax[static_cast<std::size_t>(c)] = best;
  }
  return out;
}

Vector Softmax(const Eigen::Ref<const Vector>& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

namespace {

Matrix LeakyMatrix(const Matrix& a, double slope) {
  return a.unaryExpr([slope](double x) { return LeakyRelu(x, slope); });
}

Matrix LeakyGradMatrix(const Matrix& a, double slope) {
  return a.unaryExpr([slope](double x) { return LeakyReluGrad(x, slope); });
}

void CheckInputs(const OmegaParams& omega, const Matrix& projected) {
  if (static_cast<std::size_t>(projected.cols()) != omega.shape().k) {
    Fail(ErrorKind::kInvalidArgument,
         "task learner expects " + std::to_string(omega.shape().k) +
             " input columns, got " + std::to_string(projected.cols()));
  }
  if (projected.rows() < 1) {
    Fail(ErrorKind::kInvalidArgument, "bag without instances");
  }
  if (!projected.allFinite()) {
    Fail(ErrorKind::kDivergence, "non-finite task learner input");
  }
}

void CheckLabels(const OmegaParams& omega, std::span<const LabelIndex> active,
                 const Vector& y) {
  if (static_cast<std::size_t>(y.size()) != active.size()) {
    Fail(ErrorKind::kInvalidArgument,
         "target vector length " + std::to_string(y.size()) +
             " does not match " + std::to_string(active.size()) +
             " active labels");
  }
  for (LabelIndex l : active) {
    if (l >= omega.shape().q) {
      Fail(ErrorKind::kInvalidArgument, "active label out of range");
    }
  }
}

}  // namespace

TaskPrediction Forward(const OmegaParams& omega, const Matrix& projected,
                       double slope) {
  CheckInputs(omega, projected);
  TaskPrediction p;
  p.a1 = (projected * omega.W1().transpose()).rowwise() +
         omega.b1().transpose();
  p.h1 = LeakyMatrix(p.a1, slope);
  p.a2 = (p.h1 * omega.W2().transpose()).rowwise() + omega.b2().transpose();
  p.h2 = LeakyMatrix(p.a2, slope);

  const Matrix inst_logits =
      (p.h2 * omega.Wi().transpose()).rowwise() + omega.bi().transpose();
  p.instance_scores.resize(inst_logits.rows(), inst_logits.cols());
  for (Eigen::Index r = 0; r < inst_logits.rows(); ++r) {
    p.instance_scores.row(r) =
        Softmax(inst_logits.row(r).transpose()).transpose();
  }

  p.pooled = MaxPoolColumns(p.h2);
  const Vector bag_logits = omega.Wb() * p.pooled.value + omega.bb();
  p.bag_scores = Softmax(bag_logits);
  return p;
}

double TaskLossValue(const OmegaParams& omega, const Matrix& projected,
                     std::span<const LabelIndex> active, const Vector& y,
                     double slope) {
  CheckLabels(omega, active, y);
  const TaskPrediction p = Forward(omega, projected, slope);
  const ColumnMax mpz = MaxPoolColumns(p.instance_scores);
  double loss = 0.0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const double g = p.bag_scores[active[i]];
    const double m = mpz.value[active[i]];
    const double e1 = y[static_cast<Eigen::Index>(i)] - g;
    const double e2 = g - m;
    loss += e1 * e1 + e2 * e2;
  }
  return loss;
}

TaskLossResult TaskLoss(const OmegaParams& omega, const Matrix& projected,
                        std::span<const LabelIndex> active, const Vector& y,
                        double slope) {
  CheckLabels(omega, active, y);
  TaskLossResult r;
  r.prediction = Forward(omega, projected, slope);
  const TaskPrediction& p = r.prediction;
  const OmegaShape& s = omega.shape();
  const auto q = static_cast<Eigen::Index>(s.q);
  const Eigen::Index n = projected.rows();

  const ColumnMax mpz = MaxPoolColumns(p.instance_scores);
  Vector d_g = Vector::Zero(q);
  Matrix d_z = Matrix::Zero(n, q);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const LabelIndex a = active[i];
    const double g = p.bag_scores[a];
    const double m = mpz.value[a];
    const double e1 = y[static_cast<Eigen::Index>(i)] - g;
    const double e2 = g - m;
    r.loss += e1 * e1 + e2 * e2;
    d_g[a] += -2.0 * e1 + 2.0 * e2;
    d_z(mpz.argmax[a], a) += -2.0 * e2;
  }

  r.grad_omega = OmegaParams(s);
  OmegaParams& G = r.grad_omega;

  // Bag head: softmax backward, then affine.
  const Vector d_bag_logits =
      p.bag_scores.cwiseProduct(d_g.array().matrix() -
                                Vector::Constant(q, d_g.dot(p.bag_scores)));
  G.Wb() = d_bag_logits * p.pooled.value.transpose();
  G.bb() = d_bag_logits;
  const Vector d_pooled = omega.Wb().transpose() * d_bag_logits;

  // Instance head: row-wise softmax backward.
  Matrix d_inst_logits(n, q);
  for (Eigen::Index r_i = 0; r_i < n; ++r_i) {
    const Vector z = p.instance_scores.row(r_i).transpose();
    const Vector dz = d_z.row(r_i).transpose();
    d_inst_logits.row(r_i) =
        z.cwiseProduct(dz - Vector::Constant(q, dz.dot(z))).transpose();
  }
  G.Wi() = d_inst_logits.transpose() * p.h2;
  G.bi() = d_inst_logits.colwise().sum().transpose();

  Matrix d_h2 = d_inst_logits * omega.Wi();
  for (Eigen::Index c = 0; c < d_pooled.size(); ++c) {
    d_h2(p.pooled.argmax[static_cast<std::size_t>(c)], c) += d_pooled[c];
  }

  const Matrix d_a2 = d_h2.cwiseProduct(LeakyGradMatrix(p.a2, slope));
  G.W2() = d_a2.transpose() * p.h1;
  G.b2() = d_a2.colwise().sum().transpose();
  const Matrix d_h1 = d_a2 * omega.W2();
  const Matrix d_a1 = d_h1.cwiseProduct(LeakyGradMatrix(p.a1, slope));
  G.W1() = d_a1.transpose() * projected;
  G.b1() = d_a1.colwise().sum().transpose();
  r.grad_input = d_a1 * omega.W1();
  return r;
}

GradCheckReport GradCheck(const OmegaParams& omega, const Matrix& projected,
                          std::span<const LabelIndex> active, const Vector& y,
                          double slope, double h) {
  if (!(h > 0.0)) Fail(ErrorKind::kInvalidArgument, "step must be positive");
  const TaskLossResult analytic = TaskLoss(omega, projected, active, y, slope);
  GradCheckReport report;
  auto consider = [&](double a, double num, bool is_input, std::size_t idx) {
    const double denom = std::max({std::abs(a), std::abs(num), 1e-6});
    const double rel = std::abs(a - num) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = rel;
      report.worst_is_input = is_input;
      report.worst_index = idx;
      report.analytic = a;
      report.numeric = num;
    }
  };

  OmegaParams probe = omega;
  for (Eigen::Index i = 0; i < probe.flat().size(); ++i) {
    const double keep = probe.flat()[i];
    probe.flat()[i] = keep + h;
    const double up = TaskLossValue(probe, projected, active, y, slope);
    probe.flat()[i] = keep - h;
    const double down = TaskLossValue(probe, projected, active, y, slope);
    probe.flat()[i] = keep;
    consider(analytic.grad_omega.flat()[i], (up - down) / (2.0 * h), false,
             static_cast<std::size_t>(i));
  }
  Matrix x = projected;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double& cell = x.data()[i];
    const double keep = cell;
    cell = keep + h;
    const double up = TaskLossValue(omega, x, active, y, slope);
    cell = keep - h;
    const double down = TaskLossValue(omega, x, active, y, slope);
    cell = keep;
    consider(analytic.grad_input.data()[i], (up - down) / (2.0 * h), true,
             static_cast<std::size_t>(i));
  }
  return report;
}

std::string SerializeOmega(const OmegaParams& omega) {
  const OmegaShape& s = omega.shape();
  std::string body;
  for (Eigen::Index i = 0; i < omega.flat().size(); ++i) {
    body += FormatDouble(omega.flat()[i]);
    body += '\n';
  }
  std::ostringstream out;
  out << "OMEGA v1 " << s.k << " " << s.h1 << " " << s.h2 << " " << s.q << " "
      << omega.flat().size() << "\n"
      << body << "CHECKSUM " << HexU64(Fnv1a64(body)) << "\n";
  return out.str();
}

void SaveOmega(const OmegaParams& omega, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeOmega(omega);
}

OmegaParams ParseOmega(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  std::istringstream h(header);
  std::string magic, version;
  OmegaShape s;
  std::size_t count = 0;
  h >> magic >> version >> s.k >> s.h1 >> s.h2 >> s.q >> count;
  if (!h || magic != "OMEGA" || version != "v1") {
    Fail(ErrorKind::kData, "checkpoint header: expected 'OMEGA v1 k h1 h2 q n'");
  }
  if (count != s.size()) {
    Fail(ErrorKind::kData, "checkpoint parameter count does not match shape");
  }
  Vector flat(static_cast<Eigen::Index>(count));
  std::string body;
  std::string line;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line) ||
        !ParseDouble(line, &flat[static_cast<Eigen::Index>(i)])) {
      Fail(ErrorKind::kData, "checkpoint value " + std::to_string(i) +
                                 " is missing or malformed");
    }
    body += line;
    body += '\n';
  }
  std::string tag, sum;
  in >> tag >> sum;
  if (tag != "CHECKSUM" || sum != HexU64(Fnv1a64(body))) {
    Fail(ErrorKind::kData, "checkpoint checksum mismatch");
  }
  return OmegaParams(s, std::move(flat));
}

OmegaParams LoadOmega(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseOmega(buf.str());
}

}  // namespace metamiml
