// Very sparse random projection that fuses instance features with the bag
// context: x_hat = (x ⊕ X_ctx)^T E.

#ifndef METAMIML_PROJECTION_H_
#define METAMIML_PROJECTION_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metamiml/common.h"
#include "metamiml/hmin.h"

namespace metamiml {

struct ProjectionEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::int8_t sign = 1;  // +1 or -1

  bool operator==(const ProjectionEntry&) const = default;
};

class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;

  // Entries are +scale w.p. 1/(2s), -scale w.p. 1/(2s) and 0 otherwise,
  // with scale = sqrt(s/k).
  static ProjectionMatrix Sample(std::size_t u, std::size_t k, double s,
                                 std::uint64_t seed);

  // Arbitrary sparse sign pattern with an explicit scale; lets tests build
  // identity-like maps.
  static ProjectionMatrix FromEntries(std::size_t u, std::size_t k, double s,
                                      double scale,
                                      std::vector<ProjectionEntry> entries,
                                      std::uint64_t seed = 0);

  std::size_t input_dim() const { return u_; }   // u = d + d_l
  std::size_t output_dim() const { return k_; }  // k
  double sparsity() const { return s_; }
  double scale() const { return scale_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<ProjectionEntry>& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }

  // Row vector times E.
  Vector Apply(const Eigen::Ref<const Vector>& x) const;
  // E times a length-k vector (the adjoint, used for backprop).
  Vector ApplyTranspose(const Eigen::Ref<const Vector>& y) const;
  Matrix ToDense() const;

  bool operator==(const ProjectionMatrix& other) const;

 private:
  std::size_t u_ = 0;
  std::size_t k_ = 0;
  double s_ = 1.0;
  double scale_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<ProjectionEntry> entries_;  // sorted by (row, col)
  std::vector<std::size_t> row_start_;    // CSR offsets, size u + 1
};

// s = sqrt(n) or s = n / log(n), with n the number of bags; never below 1.
enum class SparsityPolicy { kSqrtN, kNOverLogN };
double SparsityFor(SparsityPolicy policy, std::size_t num_bags);

struct ProjectedBag {
  NodeId bag = 0;
  std::uint32_t path = 0;
  Matrix rows;  // n_i x k
};

// Row j of the result is (instances.row(j) ⊕ context)^T E.
Matrix ProjectInstances(const Matrix& instances, const Vector& context,
                        const ProjectionMatrix& E);
ProjectedBag ProjectBag(const Bag& bag, const Vector& context,
                        const ProjectionMatrix& E, std::uint32_t path = 0);

// Given dL/dX_hat (n_i x k), returns dL/dcontext (length d_l): the context
// block of E applied to every row gradient, summed over rows.
Vector ContextGradient(const Matrix& grad_projected, std::size_t instance_dim,
                       const ProjectionMatrix& E);

// Projection file: `SRP v1 u=<u> k=<k> s=<s> scale=<c> seed=<seed> nnz=<n>`
// followed by `row col sign` triplets.
void SaveProjection(const ProjectionMatrix& E,
                    const std::filesystem::path& path);
std::string SerializeProjection(const ProjectionMatrix& E);
ProjectionMatrix LoadProjection(const std::filesystem::path& path);
ProjectionMatrix ParseProjection(const std::string& text);

}  // namespace metamiml

#endif  // METAMIML_PROJECTION_H_
