// Multi-label evaluation: macro AUROC, macro AUPRC, top-K average F1 and
// 1 - Hamming loss, each with a brute-force reference implementation.

#ifndef METAMIML_METRICS_H_
#define METAMIML_METRICS_H_

#include <span>
#include <string>
#include <vector>

#include "metamiml/common.h"

namespace metamiml {

// Rows are evaluated bags, columns labels. `mask` (same shape, 0/1) selects
// the cells that take part in evaluation; empty means every cell.
struct ScoreMatrix {
  Matrix scores;
  Matrix truth;
  Matrix mask;

  void Check() const;
  bool Active(Eigen::Index r, Eigen::Index c) const {
    return mask.size() == 0 || mask(r, c) != 0.0;
  }
};

// Midrank formulation; ties count 1/2. Needs both classes present.
double Auroc(std::span<const double> scores, std::span<const double> truth);
// Step-interpolated average precision; tied scores enter together.
double Auprc(std::span<const double> scores, std::span<const double> truth);

struct MacroResult {
  double value = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;  // degenerate labels left out of the mean
};

MacroResult MacroAuroc(const ScoreMatrix& s);
MacroResult MacroAuprc(const ScoreMatrix& s);

// 0/1 matrix marking the K best active labels of each row (ties go to the
// lowest label index). Rows with fewer active cells predict all of them.
Matrix TopKPredictions(const ScoreMatrix& s, std::size_t K);

// Macro F1 over labels present in the truth or the prediction.
MacroResult AvgF1TopK(const ScoreMatrix& s, std::size_t K);

double OneMinusHl(const Matrix& pred, const Matrix& truth,
                  const Matrix& mask = Matrix());

// round(mean active positives per row), half away from zero, at least 1.
std::size_t DefaultK(const ScoreMatrix& s);
std::size_t DefaultK(double mean_labels_per_row);

namespace brute {

double Auroc(std::span<const double> scores, std::span<const double> truth);
double Auprc(std::span<const double> scores, std::span<const double> truth);
MacroResult MacroAuroc(const ScoreMatrix& s);
MacroResult MacroAuprc(const ScoreMatrix& s);
MacroResult AvgF1TopK(const ScoreMatrix& s, std::size_t K);
double OneMinusHl(const Matrix& pred, const Matrix& truth,
                  const Matrix& mask = Matrix());

}  // namespace brute

struct ReportRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run
  std::size_t n_runs = 0;
  std::size_t K = 0;
  std::size_t excluded_labels = 0;
};

struct RunMetrics {
  double auroc = 0.0, auprc = 0.0, avg_f1 = 0.0, one_minus_hl = 0.0;
  std::size_t K = 0;
  std::size_t excluded_labels = 0;
};

RunMetrics Evaluate(const ScoreMatrix& s, std::size_t K = 0);

// Aggregates runs into the four report rows (mean and sample std).
std::vector<ReportRow> Summarize(const std::vector<RunMetrics>& runs);

// Tab separated, header line then one row per metric, 4 decimals.
std::string FormatReport(const std::vector<ReportRow>& rows);

}  // namespace metamiml

#endif  // METAMIML_METRICS_H_
