#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "metamiml/tasklearner.h"

using namespace metamiml;

namespace {

Matrix RandomMatrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n01;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

// True when every pre-activation and every pooled column is at least `gap`
// away from a kink or a tie, so central differences are smooth.
bool Smooth(const OmegaParams& w, const Matrix& X, double slope, double gap) {
  const TaskPrediction p = Forward(w, X, slope);
  if (p.a1.cwiseAbs().minCoeff() < gap || p.a2.cwiseAbs().minCoeff() < gap) return false;
  auto margin_ok = [&](const Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::vector<double> col(m.col(c).data(), m.col(c).data() + m.rows());
      std::sort(col.rbegin(), col.rend());
      if (col.size() > 1 && col[0] - col[1] < gap) return false;
    }
    return true;
  };
  return margin_ok(p.h2) && margin_ok(p.instance_scores);
}

}  // namespace

TEST_CASE("max pool columns") {
  Matrix m(2, 2);
  m << 0.2, 0.7, 0.5, 0.3;
  const ColumnMax c = MaxPoolColumns(m);
  CHECK(c.value[0] == 0.5);
  CHECK(c.value[1] == 0.7);
  CHECK(c.argmax == std::vector<Eigen::Index>{1, 0});

  Matrix one(1, 3);
  one << -1, 2, 0;
  CHECK(MaxPoolColumns(one).value == one.row(0).transpose());

  Matrix tie(3, 1);
  tie << 4, 4, 1;
  CHECK(MaxPoolColumns(tie).argmax[0] == 0);
  CHECK_THROWS_AS(MaxPoolColumns(Matrix(0, 2)), Error);
}

TEST_CASE("max pool agrees with a per-column scan") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const Matrix m = RandomMatrix(5, 4, rng);
    const ColumnMax c = MaxPoolColumns(m);
    for (Eigen::Index j = 0; j < 4; ++j) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < 5; ++i) {
        if (m(i, j) > m(best, j)) best = i;
      }
      CHECK(c.value[j] == m(best, j));
      CHECK(c.argmax[static_cast<std::size_t>(j)] == best);
    }
  }
}

TEST_CASE("forward invariants") {
  Rng rng(2);
  const OmegaShape shape{6, 5, 4, 3};
  const OmegaParams w = OmegaParams::Random(shape, 9);
  const Matrix X = RandomMatrix(4, 6, rng);
  const TaskPrediction p = Forward(w, X, 0.01);
  for (Eigen::Index r = 0; r < 4; ++r) {
    CHECK(std::abs(p.instance_scores.row(r).sum() - 1.0) < 1e-6);
  }
  CHECK(p.bag_scores.minCoeff() >= 0.0);
  CHECK(p.bag_scores.maxCoeff() <= 1.0);

  // A single instance: pooling returns its trunk row.
  const TaskPrediction one = Forward(w, X.topRows(1), 0.01);
  CHECK(one.pooled.value == one.h2.row(0).transpose());

  // Row permutation: same bag scores, permuted instance scores.
  const std::vector<int> perm = {2, 0, 3, 1};
  Matrix Xp(4, 6);
  for (int r = 0; r < 4; ++r) Xp.row(r) = X.row(perm[r]);
  const TaskPrediction pp = Forward(w, Xp, 0.01);
  CHECK((pp.bag_scores - p.bag_scores).cwiseAbs().maxCoeff() == 0.0);
  for (int r = 0; r < 4; ++r) {
    CHECK((pp.instance_scores.row(r) - p.instance_scores.row(perm[r])).cwiseAbs().maxCoeff() <
          1e-15);
  }
  CHECK_THROWS_AS(Forward(w, RandomMatrix(2, 5, rng), 0.01), Error);
  Matrix bad = X;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(Forward(w, bad, 0.01), Error);
}

TEST_CASE("hand-built losses") {
  // Zero trunk weights; the heads are steered by their biases alone.
  const OmegaShape shape{2, 2, 2, 2};
  OmegaParams w(shape);
  w.bb() << 60.0, 0.0;
  w.bi() << 60.0, 0.0;
  const Matrix X = Matrix::Constant(3, 2, 0.5);
  const std::vector<LabelIndex> both = {0, 1};

  Vector y(2);
  y << 1, 0;
  CHECK(TaskLossValue(w, X, both, y, 0.01) < 1e-20);

  y << 0, 1;
  CHECK(TaskLossValue(w, X, both, y, 0.01) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(TaskLoss(w, X, both, y, 0.01).loss == TaskLossValue(w, X, both, y, 0.01));
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(3);
  const OmegaShape shape{8, 6, 6, 5};
  std::uniform_int_distribution<int> coin(0, 1);
  int done = 0;
  double worst = 0.0;
  std::uint64_t seed = 0;
  while (done < 100) {
    const OmegaParams w = OmegaParams::Random(shape, ++seed);
    const Matrix X = RandomMatrix(4, 8, rng);
    if (!Smooth(w, X, 0.01, 1e-3)) continue;
    std::vector<LabelIndex> active = {0, 1, 2, 3, 4};
    Vector y(5);
    for (int i = 0; i < 5; ++i) y[i] = coin(rng);
    const GradCheckReport r = GradCheck(w, X, active, y, 0.01, 1e-5);
    CHECK(r.checked == shape.size() + 32);
    worst = std::max(worst, r.max_rel_error);
    ++done;
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient check on a label subset") {
  Rng rng(4);
  const OmegaShape shape{5, 4, 4, 6};
  const OmegaParams w = OmegaParams::Random(shape, 77);
  const Matrix X = RandomMatrix(3, 5, rng);
  const std::vector<LabelIndex> active = {1, 4};
  Vector y(2);
  y << 1, 0;
  CHECK(GradCheck(w, X, active, y, 0.01, 1e-5).max_rel_error < 1e-4);
}

TEST_CASE("linear trunk gives near-exact differences") {
  Rng rng(5);
  const OmegaShape shape{4, 3, 3, 2};
  const OmegaParams w = OmegaParams::Random(shape, 5);
  const Matrix X = RandomMatrix(1, 4, rng);  // one row: no pooling ties
  const std::vector<LabelIndex> active = {0, 1};
  Vector y(2);
  y << 0, 1;
  CHECK(GradCheck(w, X, active, y, 1.0, 1e-5).max_rel_error < 1e-7);
}

TEST_CASE("coarse step degrades the difference quotient") {
  Rng rng(6);
  const OmegaShape shape{8, 6, 6, 5};
  const OmegaParams w = OmegaParams::Random(shape, 6);
  const Matrix X = RandomMatrix(4, 8, rng);
  const std::vector<LabelIndex> active = {0, 1, 2, 3, 4};
  Vector y(5);
  y << 1, 0, 1, 0, 0;
  const double fine = GradCheck(w, X, active, y, 0.01, 1e-5).max_rel_error;
  const double coarse = GradCheck(w, X, active, y, 0.01, 1e-1).max_rel_error;
  CHECK(coarse > 1e-3);
  CHECK(coarse > fine);
}

TEST_CASE("loss is non-negative") {
  Rng rng(7);
  const OmegaShape shape{4, 4, 4, 3};
  std::uniform_int_distribution<int> coin(0, 1);
  for (int t = 0; t < 50; ++t) {
    const OmegaParams w = OmegaParams::Random(shape, 1000 + t);
    Vector y(3);
    for (int i = 0; i < 3; ++i) y[i] = coin(rng);
    const std::vector<LabelIndex> active = {0, 1, 2};
    CHECK(TaskLossValue(w, RandomMatrix(3, 4, rng), active, y, 0.01) >= 0.0);
  }
}

TEST_CASE("parameter layout, product and checkpoint") {
  const OmegaShape shape{3, 2, 2, 4};
  CHECK(shape.size() == 3 * 2 + 2 + 2 * 2 + 2 + 4 * 2 + 4 + 4 * 2 + 4);
  OmegaParams w = OmegaParams::Random(shape, 3);
  CHECK(w.b1().isZero(0.0));
  const auto idx = w.HeadIndices(2);
  CHECK(idx.size() == 2 * (2 + 1));
  for (std::size_t i : idx) w.flat()[static_cast<Eigen::Index>(i)] = 123.0;
  CHECK(w.Wi().row(2).isConstant(123.0));
  CHECK(w.Wb().row(2).isConstant(123.0));
  CHECK(w.bi()[2] == 123.0);
  CHECK(w.bb()[2] == 123.0);

  OmegaParams ones(shape, Vector::Ones(static_cast<Eigen::Index>(shape.size())));
  CHECK(w.ElementwiseProduct(ones) == w);
  CHECK(w.ElementwiseProduct(w).flat() == w.flat().cwiseProduct(w.flat()));

  const OmegaParams back = ParseOmega(SerializeOmega(w));
  CHECK(back == w);
  std::string text = SerializeOmega(w);
  text[text.find('\n') + 1] = text[text.find('\n') + 1] == '9' ? '8' : '9';
  CHECK_THROWS_AS(ParseOmega(text), Error);
}
