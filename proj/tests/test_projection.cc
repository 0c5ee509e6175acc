#include <cmath>

#include "doctest.h"
#include "metamiml/projection.h"

using namespace metamiml;

namespace {

Vector Gaussian(std::size_t n, Rng& rng) {
  std::normal_distribution<double> n01;
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n01(rng);
  return v;
}

}  // namespace

TEST_CASE("s = 1 degenerates to a dense sign matrix") {
  const std::size_t k = 100;
  const ProjectionMatrix E = ProjectionMatrix::Sample(100, k, 1.0, 4);
  CHECK(E.nnz() == 10000);
  const Matrix D = E.ToDense();
  const double c = std::sqrt(1.0 / k);
  std::size_t plus = 0;
  for (Eigen::Index i = 0; i < D.size(); ++i) {
    CHECK(std::abs(std::abs(D.data()[i]) - c) < 1e-15);
    if (D.data()[i] > 0) ++plus;
  }
  CHECK(std::abs(plus / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("s = 100 keeps about one entry in a hundred") {
  const ProjectionMatrix E = ProjectionMatrix::Sample(100, 100, 100.0, 5);
  CHECK(std::abs(E.nnz() / 10000.0 - 0.01) <= 0.005);
  CHECK(E.scale() == doctest::Approx(std::sqrt(100.0 / 100.0)));
}

TEST_CASE("sampling is deterministic") {
  CHECK(ProjectionMatrix::Sample(30, 8, 3.0, 9) == ProjectionMatrix::Sample(30, 8, 3.0, 9));
  CHECK_FALSE(ProjectionMatrix::Sample(30, 8, 3.0, 9) ==
              ProjectionMatrix::Sample(30, 8, 3.0, 10));
  CHECK_THROWS_AS(ProjectionMatrix::Sample(0, 8, 3.0, 9), Error);
  CHECK_THROWS_AS(ProjectionMatrix::Sample(4, 8, 0.5, 9), Error);
}

TEST_CASE("zero inputs project to zero rows") {
  const ProjectionMatrix E = ProjectionMatrix::Sample(7, 5, 2.0, 1);
  const Matrix X = ProjectInstances(Matrix::Zero(3, 4), Vector::Zero(3), E);
  CHECK(X.rows() == 3);
  CHECK(X.cols() == 5);
  CHECK(X.isZero(0.0));
}

TEST_CASE("identity map returns the concatenated input") {
  const std::size_t u = 5;
  std::vector<ProjectionEntry> diag;
  for (std::uint32_t i = 0; i < u; ++i) diag.push_back({i, i, 1});
  const ProjectionMatrix E = ProjectionMatrix::FromEntries(u, u, 1.0, 1.0, diag);
  Matrix inst(2, 3);
  inst << 1, 2, 3, -4, 5.5, 6;
  Vector ctx(2);
  ctx << 0.25, -7;
  const Matrix X = ProjectInstances(inst, ctx, E);
  Matrix expect(2, 5);
  expect << 1, 2, 3, 0.25, -7, -4, 5.5, 6, 0.25, -7;
  CHECK(X == expect);
}

TEST_CASE("projection matches the dense product and is homogeneous") {
  Rng rng(12);
  const ProjectionMatrix E = ProjectionMatrix::Sample(9, 6, 3.0, 2);
  const Matrix D = E.ToDense();
  Matrix inst(4, 5);
  for (Eigen::Index r = 0; r < 4; ++r) inst.row(r) = Gaussian(5, rng).transpose();
  const Vector ctx = Gaussian(4, rng);
  const Matrix X = ProjectInstances(inst, ctx, E);
  for (Eigen::Index r = 0; r < 4; ++r) {
    Vector cat(9);
    cat << inst.row(r).transpose(), ctx;
    CHECK((X.row(r).transpose() - D.transpose() * cat).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((E.Apply(cat) - D.transpose() * cat).cwiseAbs().maxCoeff() < 1e-12);
  }
  const Vector y = Gaussian(6, rng);
  CHECK((E.ApplyTranspose(y) - D * y).cwiseAbs().maxCoeff() < 1e-12);

  const double a = 2.5;
  const Matrix Xa = ProjectInstances(a * inst, a * ctx, E);
  CHECK((Xa - a * X).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(ProjectInstances(inst, Gaussian(3, rng), E), Error);
}

TEST_CASE("context gradient is the context block of the adjoint") {
  Rng rng(13);
  const ProjectionMatrix E = ProjectionMatrix::Sample(7, 4, 2.0, 6);
  const Matrix D = E.ToDense();
  Matrix G(3, 4);
  for (Eigen::Index r = 0; r < 3; ++r) G.row(r) = Gaussian(4, rng).transpose();
  Vector expect = Vector::Zero(3);
  for (Eigen::Index r = 0; r < 3; ++r) {
    expect += D.bottomRows(3) * G.row(r).transpose();
  }
  CHECK((ContextGradient(G, 4, E) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("random pairs keep their distances") {
  Rng rng(21);
  int inside = 0;
  for (int t = 0; t < 50; ++t) {
    const ProjectionMatrix E = ProjectionMatrix::Sample(64, 32, 8.0, 100 + t);
    const Vector x = Gaussian(64, rng), y = Gaussian(64, rng);
    const double ratio = (E.Apply(x) - E.Apply(y)).squaredNorm() / (x - y).squaredNorm();
    if (ratio >= 0.5 && ratio <= 1.5) ++inside;
  }
  CHECK(inside >= 45);
}

TEST_CASE("squared norm preserved in expectation") {
  Rng rng(22);
  const ProjectionMatrix E = ProjectionMatrix::Sample(64, 32, 8.0, 3);
  double sum = 0;
  for (int t = 0; t < 1000; ++t) {
    const Vector x = Gaussian(64, rng);
    sum += E.Apply(x).squaredNorm() / x.squaredNorm();
  }
  // One fixed E: the mean over x is ||E||_F^2 / u, close to 1 for k >= 32.
  CHECK(std::abs(sum / 1000 - 1.0) < 0.1);
}

TEST_CASE("sparsity policies") {
  CHECK(SparsityFor(SparsityPolicy::kSqrtN, 100) == doctest::Approx(10.0));
  CHECK(SparsityFor(SparsityPolicy::kNOverLogN, 100) ==
        doctest::Approx(100.0 / std::log(100.0)));
  CHECK(SparsityFor(SparsityPolicy::kSqrtN, 0) == 1.0);
  CHECK(SparsityFor(SparsityPolicy::kNOverLogN, 2) >= 1.0);
}

TEST_CASE("projection file round trip") {
  const ProjectionMatrix E = ProjectionMatrix::Sample(20, 6, std::sqrt(60.0), 77);
  const ProjectionMatrix back = ParseProjection(SerializeProjection(E));
  CHECK(back == E);
  CHECK(back.scale() == E.scale());
  CHECK(back.sparsity() == E.sparsity());
  CHECK_THROWS_AS(ParseProjection("SRP v1 u=2\n"), Error);
}
