#include "metamiml/projection.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace metamiml {

ProjectionMatrix ProjectionMatrix::Sample(std::size_t u, std::size_t k,
                                          double s, std::uint64_t seed) {
  if (u < 1 || k < 1) {
    Fail(ErrorKind::kInvalidArgument, "projection dimensions must be >= 1");
  }
  if (!(s >= 1.0) || !std::isfinite(s)) {
    Fail(ErrorKind::kInvalidArgument, "projection sparsity s must be >= 1");
  }
  std::vector<ProjectionEntry> entries;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double half = 1.0 / (2.0 * s);
  for (std::size_t r = 0; r < u; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double x = unit(rng);
      if (x < half) {
        entries.push_back({static_cast<std::uint32_t>(r),
                           static_cast<std::uint32_t>(c), 1});
      } else if (x < 2.0 * half) {
        entries.push_back({static_cast<std::uint32_t>(r),
                           static_cast<std::uint32_t>(c), -1});
      }
    }
  }
  return FromEntries(u, k, s, std::sqrt(s / static_cast<double>(k)),
                     std::move(entries), seed);
}

ProjectionMatrix ProjectionMatrix::FromEntries(
    std::size_t u, std::size_t k, double s, double scale,
    std::vector<ProjectionEntry> entries, std::uint64_t seed) {
  ProjectionMatrix E;
  E.u_ = u;
  E.k_ = k;
  E.s_ = s;
  E.scale_ = scale;
  E.seed_ = seed;
  std::sort(entries.begin(), entries.end(),
            [](const ProjectionEntry& a, const ProjectionEntry& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.row >= u || e.col >= k || (e.sign != 1 && e.sign != -1)) {
      Fail(ErrorKind::kInvalidArgument, "projection entry out of range");
    }
    if (i > 0 && entries[i - 1].row == e.row && entries[i - 1].col == e.col) {
      Fail(ErrorKind::kInvalidArgument, "duplicate projection entry");
    }
  }
  E.entries_ = std::move(entries);
  E.row_start_.assign(u + 1, 0);
  for (const auto& e : E.entries_) ++E.row_start_[e.row + 1];
  for (std::size_t r = 0; r < u; ++r) E.row_start_[r + 1] += E.row_start_[r];
  return E;
}

Vector ProjectionMatrix::Apply(const Eigen::Ref<const Vector>& x) const {
  if (static_cast<std::size_t>(x.size()) != u_) {
    Fail(ErrorKind::kInvalidArgument,
         "projection input has length " + std::to_string(x.size()) +
             ", expected " + std::to_string(u_));
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(k_));
  for (std::size_t r = 0; r < u_; ++r) {
    const double v = x[static_cast<Eigen::Index>(r)] * scale_;
    if (v == 0.0) continue;
    for (std::size_t i = row_start_[r]; i < row_start_[r + 1]; ++i) {
      out[entries_[i].col] += entries_[i].sign * v;
    }
  }
  return out;
}

Vector ProjectionMatrix::ApplyTranspose(const Eigen::Ref<const Vector>& y) const {
  if (static_cast<std::size_t>(y.size()) != k_) {
    Fail(ErrorKind::kInvalidArgument, "projection adjoint input has length " +
                                          std::to_string(y.size()) +
                                          ", expected " + std::to_string(k_));
  }
  Vector out = Vector::Zero(static_cast<Eigen::Index>(u_));
  for (const auto& e : entries_) out[e.row] += e.sign * scale_ * y[e.col];
  return out;
}

Matrix ProjectionMatrix::ToDense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(u_),
                          static_cast<Eigen::Index>(k_));
  for (const auto& e : entries_) m(e.row, e.col) = e.sign * scale_;
  return m;
}

bool ProjectionMatrix::operator==(const ProjectionMatrix& other) const {
  return u_ == other.u_ && k_ == other.k_ && s_ == other.s_ &&
         scale_ == other.scale_ && seed_ == other.seed_ &&
         entries_ == other.entries_;
}

double SparsityFor(SparsityPolicy policy, std::size_t num_bags) {
  const double n = static_cast<double>(num_bags);
  double s = 1.0;
  switch (policy) {
    case SparsityPolicy::kSqrtN:
      s = std::sqrt(n);
      break;
    case SparsityPolicy::kNOverLogN:
      s = n > 1.0 ? n / std::log(n) : 1.0;
      break;
  }
  return std::max(1.0, s);
}

Matrix ProjectInstances(const Matrix& instances, const Vector& context,
                        const ProjectionMatrix& E) {
  const std::size_t d = static_cast<std::size_t>(instances.cols());
  if (d + static_cast<std::size_t>(context.size()) != E.input_dim()) {
    Fail(ErrorKind::kInvalidArgument,
         "projection expects u=" + std::to_string(E.input_dim()) + " but got d=" +
             std::to_string(d) + " plus d_l=" + std::to_string(context.size()));
  }
  // The context block is shared by every row, so project it once.
  Vector joint = Vector::Zero(static_cast<Eigen::Index>(E.input_dim()));
  joint.tail(context.size()) = context;
  const Vector context_part = E.Apply(joint);
  Matrix out(instances.rows(), static_cast<Eigen::Index>(E.output_dim()));
  for (Eigen::Index j = 0; j < instances.rows(); ++j) {
    joint.head(static_cast<Eigen::Index>(d)) = instances.row(j).transpose();
    joint.tail(context.size()).setZero();
    out.row(j) = (E.Apply(joint) + context_part).transpose();
  }
  return out;
}

ProjectedBag ProjectBag(const Bag& bag, const Vector& context,
                        const ProjectionMatrix& E, std::uint32_t path) {
  return {bag.node, path, ProjectInstances(bag.instances, context, E)};
}

Vector ContextGradient(const Matrix& grad_projected, std::size_t instance_dim,
                       const ProjectionMatrix& E) {
  if (static_cast<std::size_t>(grad_projected.cols()) != E.output_dim() ||
      instance_dim > E.input_dim()) {
    Fail(ErrorKind::kInvalidArgument, "context gradient shape mismatch");
  }
  const Vector summed = grad_projected.colwise().sum().transpose();
  const Vector full = E.ApplyTranspose(summed);
  return full.tail(static_cast<Eigen::Index>(E.input_dim() - instance_dim));
}

std::string SerializeProjection(const ProjectionMatrix& E) {
  std::ostringstream out;
  out << "SRP v1 u=" << E.input_dim() << " k=" << E.output_dim()
      << " s=" << FormatDouble(E.sparsity())
      << " scale=" << FormatDouble(E.scale()) << " seed=" << E.seed()
      << " nnz=" << E.nnz() << "\n";
  for (const auto& e : E.entries()) {
    out << e.row << " " << e.col << " " << (e.sign > 0 ? "+1" : "-1") << "\n";
  }
  return out.str();
}

void SaveProjection(const ProjectionMatrix& E,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeProjection(E);
}

namespace {

std::string Field(std::istream& in, const std::string& key) {
  std::string tok;
  in >> tok;
  if (tok.rfind(key + "=", 0) != 0) {
    Fail(ErrorKind::kData, "projection header: expected " + key + "=...");
  }
  return tok.substr(key.size() + 1);
}

}  // namespace

ProjectionMatrix ParseProjection(const std::string& text) {
  std::istringstream in(text);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "SRP" || version != "v1") {
    Fail(ErrorKind::kData, "projection header: expected 'SRP v1'");
  }
  std::uint64_t u = 0, k = 0, seed = 0, nnz = 0;
  double s = 0, scale = 0;
  if (!ParseUint64(Field(in, "u"), &u) || !ParseUint64(Field(in, "k"), &k) ||
      !ParseDouble(Field(in, "s"), &s) ||
      !ParseDouble(Field(in, "scale"), &scale) ||
      !ParseUint64(Field(in, "seed"), &seed) ||
      !ParseUint64(Field(in, "nnz"), &nnz)) {
    Fail(ErrorKind::kData, "projection header: bad number");
  }
  std::vector<ProjectionEntry> entries;
  entries.reserve(nnz);
  for (std::uint64_t i = 0; i < nnz; ++i) {
    std::uint64_t r = 0, c = 0;
    std::string sr, sc, ss;
    in >> sr >> sc >> ss;
    if (!ParseUint64(sr, &r) || !ParseUint64(sc, &c) ||
        (ss != "+1" && ss != "-1")) {
      Fail(ErrorKind::kData, "projection triplet " + std::to_string(i) +
                                 " is malformed");
    }
    entries.push_back({static_cast<std::uint32_t>(r),
                       static_cast<std::uint32_t>(c),
                       static_cast<std::int8_t>(ss == "+1" ? 1 : -1)});
  }
  return ProjectionMatrix::FromEntries(u, k, s, scale, std::move(entries),
                                       seed);
}

ProjectionMatrix LoadProjection(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseProjection(buf.str());
}

}  // namespace metamiml
