// Task learner: shared two-layer leaky-ReLU trunk with an instance head
// (z, row softmax) and a bag head on column-max-pooled trunk features (g),
// the bag/instance consistency loss and its manual backward pass.

#ifndef METAMIML_TASKLEARNER_H_
#define METAMIML_TASKLEARNER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metamiml/common.h"

namespace metamiml {

struct OmegaShape {
  std::size_t k = 0;   // input width
  std::size_t h1 = 0;
  std::size_t h2 = 0;
  std::size_t q = 0;   // label universe size

  std::size_t size() const;
  bool operator==(const OmegaShape&) const = default;
};

// All weights live in one flat vector so elementwise combination and SGD
// steps are vector operations. Layout: W1 (h1 x k, row-major), b1, W2, b2,
// Wi (instance head, q x h2), bi, Wb (bag head, q x h2), bb.
class OmegaParams {
 public:
  using MapM = Eigen::Map<RowMatrix>;
  using CMapM = Eigen::Map<const RowMatrix>;
  using MapV = Eigen::Map<Vector>;
  using CMapV = Eigen::Map<const Vector>;

  OmegaParams() = default;
  explicit OmegaParams(const OmegaShape& shape);  // zeros
  OmegaParams(const OmegaShape& shape, Vector flat);

  // Glorot-uniform weights, zero biases.
  static OmegaParams Random(const OmegaShape& shape, std::uint64_t seed);

  const OmegaShape& shape() const { return shape_; }
  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }

  MapM W1() { return Mat(0, shape_.h1, shape_.k); }
  CMapM W1() const { return Mat(0, shape_.h1, shape_.k); }
  MapV b1() { return Vec(off_b1(), shape_.h1); }
  CMapV b1() const { return Vec(off_b1(), shape_.h1); }
  MapM W2() { return Mat(off_W2(), shape_.h2, shape_.h1); }
  CMapM W2() const { return Mat(off_W2(), shape_.h2, shape_.h1); }
  MapV b2() { return Vec(off_b2(), shape_.h2); }
  CMapV b2() const { return Vec(off_b2(), shape_.h2); }
  MapM Wi() { return Mat(off_Wi(), shape_.q, shape_.h2); }
  CMapM Wi() const { return Mat(off_Wi(), shape_.q, shape_.h2); }
  MapV bi() { return Vec(off_bi(), shape_.q); }
  CMapV bi() const { return Vec(off_bi(), shape_.q); }
  MapM Wb() { return Mat(off_Wb(), shape_.q, shape_.h2); }
  CMapM Wb() const { return Mat(off_Wb(), shape_.q, shape_.h2); }
  MapV bb() { return Vec(off_bb(), shape_.q); }
  CMapV bb() const { return Vec(off_bb(), shape_.q); }

  // Flat indices of every parameter tied to label `label` in either head.
  std::vector<std::size_t> HeadIndices(LabelIndex label) const;

  OmegaParams ElementwiseProduct(const OmegaParams& other) const;
  bool AllFinite() const { return flat_.allFinite(); }

  bool operator==(const OmegaParams& other) const;

 private:
  std::size_t off_b1() const { return shape_.h1 * shape_.k; }
  std::size_t off_W2() const { return off_b1() + shape_.h1; }
  std::size_t off_b2() const { return off_W2() + shape_.h2 * shape_.h1; }
  std::size_t off_Wi() const { return off_b2() + shape_.h2; }
  std::size_t off_bi() const { return off_Wi() + shape_.q * shape_.h2; }
  std::size_t off_Wb() const { return off_bi() + shape_.q; }
  std::size_t off_bb() const { return off_Wb() + shape_.q * shape_.h2; }

  MapM Mat(std::size_t off, std::size_t r, std::size_t c) {
    return MapM(flat_.data() + off, static_cast<Eigen::Index>(r),
                static_cast<Eigen::Index>(c));
  }
  CMapM Mat(std::size_t off, std::size_t r, std::size_t c) const {
    return CMapM(flat_.data() + off, static_cast<Eigen::Index>(r),
                 static_cast<Eigen::Index>(c));
  }
  MapV Vec(std::size_t off, std::size_t n) {
    return MapV(flat_.data() + off, static_cast<Eigen::Index>(n));
  }
  CMapV Vec(std::size_t off, std::size_t n) const {
    return CMapV(flat_.data() + off, static_cast<Eigen::Index>(n));
  }

  OmegaShape shape_;
  Vector flat_;
};

// Column-wise maximum and the (lowest-index) argmax row of each column.
struct ColumnMax {
  Vector value;
  std::vector<Eigen::Index> argmax;
};
ColumnMax MaxPoolColumns(const Eigen::Ref<const Matrix>& m);

Vector Softmax(const Eigen::Ref<const Vector>& logits);

struct TaskPrediction {
  Matrix instance_scores;  // n_i x q, row stochastic (z)
  Vector bag_scores;       // q (g)

  // Cached intermediates for the backward pass.
  Matrix a1, h1, a2, h2;
  ColumnMax pooled;
};

// `slope` is the leaky-ReLU slope of the trunk.
TaskPrediction Forward(const OmegaParams& omega, const Matrix& projected,
                       double slope);

struct TaskLossResult {
  double loss = 0.0;
  OmegaParams grad_omega;
  Matrix grad_input;  // dL/dX_hat, n_i x k
  TaskPrediction prediction;
};

// ||y - g||^2 + ||g - MP(z)||^2 restricted to `active` labels; y[i] is the
// 0/1 target for active[i]. Softmax normalises over the full universe.
TaskLossResult TaskLoss(const OmegaParams& omega, const Matrix& projected,
                        std::span<const LabelIndex> active, const Vector& y,
                        double slope);

// Loss only (no gradients).
double TaskLossValue(const OmegaParams& omega, const Matrix& projected,
                     std::span<const LabelIndex> active, const Vector& y,
                     double slope);

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool worst_is_input = false;  // worst coordinate is in X_hat, not omega
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences over every coordinate of omega and X_hat. Relative
// error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport GradCheck(const OmegaParams& omega, const Matrix& projected,
                          std::span<const LabelIndex> active, const Vector& y,
                          double slope, double h);

// Checkpoint: `OMEGA v1 k h1 h2 q count`, one value per line, then
// `CHECKSUM <fnv1a64 of the value lines>`.
void SaveOmega(const OmegaParams& omega, const std::filesystem::path& path);
std::string SerializeOmega(const OmegaParams& omega);
OmegaParams LoadOmega(const std::filesystem::path& path);
OmegaParams ParseOmega(const std::string& text);

}  // namespace metamiml

#endif  // METAMIML_TASKLEARNER_H_
