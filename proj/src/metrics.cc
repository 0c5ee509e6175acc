#include "metamiml/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace metamiml {

void ScoreMatrix::Check() const {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols()) {
    Fail(ErrorKind::kInvalidArgument, "score and truth shapes differ");
  }
  if (mask.size() != 0 &&
      (mask.rows() != scores.rows() || mask.cols() != scores.cols())) {
    Fail(ErrorKind::kInvalidArgument, "mask shape differs from scores");
  }
  if (!scores.allFinite()) {
    Fail(ErrorKind::kInvalidArgument, "scores must be finite");
  }
}

namespace {

void CheckPair(std::span<const double> scores, std::span<const double> truth) {
  if (scores.size() != truth.size()) {
    Fail(ErrorKind::kInvalidArgument, "scores and truth differ in length");
  }
}

// Scores sorted descending; returns index order.
std::vector<std::size_t> Descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

struct Column {
  std::vector<double> scores, truth;
};

Column ActiveColumn(const ScoreMatrix& s, Eigen::Index c) {
  Column col;
  for (Eigen::Index r = 0; r < s.scores.rows(); ++r) {
    if (!s.Active(r, c)) continue;
    col.scores.push_back(s.scores(r, c));
    col.truth.push_back(s.truth(r, c));
  }
  return col;
}

template <typename Fn>
MacroResult Macro(const ScoreMatrix& s, bool need_negative, Fn metric) {
  s.Check();
  MacroResult out;
  double total = 0.0;
  for (Eigen::Index c = 0; c < s.scores.cols(); ++c) {
    const Column col = ActiveColumn(s, c);
    std::size_t pos = 0;
    for (double t : col.truth) pos += t != 0.0;
    const std::size_t neg = col.truth.size() - pos;
    if (pos == 0 || (need_negative && neg == 0)) {
      ++out.excluded;
      continue;
    }
    total += metric(col.scores, col.truth);
    ++out.included;
  }
  out.value = out.included ? total / static_cast<double>(out.included) : 0.0;
  return out;
}

double F1FromCounts(double tp, double fp, double fn) {
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

double Auroc(std::span<const double> scores, std::span<const double> truth) {
  CheckPair(scores, truth);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (truth[order[t]] != 0.0) {
        rank_sum += midrank;
        ++pos;
      }
    }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) {
    Fail(ErrorKind::kInvalidArgument, "AUROC needs both classes");
  }
  const double p = static_cast<double>(pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double Auprc(std::span<const double> scores, std::span<const double> truth) {
  CheckPair(scores, truth);
  const std::vector<std::size_t> order = Descending(scores);
  double total_pos = 0.0;
  for (double t : truth) total_pos += t != 0.0;
  if (total_pos == 0.0) Fail(ErrorKind::kInvalidArgument, "AUPRC needs a positive");
  double ap = 0.0, tp = 0.0, seen = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_pos = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_pos += truth[order[j]] != 0.0;
      ++j;
    }
    tp += group_pos;
    seen += static_cast<double>(j - i);
    ap += (group_pos / total_pos) * (tp / seen);
    i = j;
  }
  return ap;
}

MacroResult MacroAuroc(const ScoreMatrix& s) {
  return Macro(s, true, [](const auto& sc, const auto& tr) {
    return Auroc(sc, tr);
  });
}

MacroResult MacroAuprc(const ScoreMatrix& s) {
  return Macro(s, false, [](const auto& sc, const auto& tr) {
    return Auprc(sc, tr);
  });
}

Matrix TopKPredictions(const ScoreMatrix& s, std::size_t K) {
  s.Check();
  if (K < 1) Fail(ErrorKind::kInvalidArgument, "K must be >= 1");
  if (K > static_cast<std::size_t>(s.scores.cols())) {
    Fail(ErrorKind::kInvalidArgument, "K=" + std::to_string(K) +
                                          " exceeds the number of labels");
  }
  Matrix pred = Matrix::Zero(s.scores.rows(), s.scores.cols());
  for (Eigen::Index r = 0; r < s.scores.rows(); ++r) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index c = 0; c < s.scores.cols(); ++c) {
      if (s.Active(r, c)) cols.push_back(c);
    }
    std::stable_sort(cols.begin(), cols.end(), [&](Eigen::Index a, Eigen::Index b) {
      return s.scores(r, a) > s.scores(r, b);
    });
    const std::size_t take = std::min(K, cols.size());
    for (std::size_t i = 0; i < take; ++i) pred(r, cols[i]) = 1.0;
  }
  return pred;
}

MacroResult AvgF1TopK(const ScoreMatrix& s, std::size_t K) {
  const Matrix pred = TopKPredictions(s, K);
  MacroResult out;
  double total = 0.0;
  for (Eigen::Index c = 0; c < s.scores.cols(); ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index r = 0; r < s.scores.rows(); ++r) {
      if (!s.Active(r, c)) continue;
      const bool p = pred(r, c) != 0.0, t = s.truth(r, c) != 0.0;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    if (tp + fp + fn == 0) {
      ++out.excluded;
      continue;
    }
    total += F1FromCounts(tp, fp, fn);
    ++out.included;
  }
  out.value = out.included ? total / static_cast<double>(out.included) : 0.0;
  return out;
}

double OneMinusHl(const Matrix& pred, const Matrix& truth, const Matrix& mask) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() ||
      (mask.size() != 0 &&
       (mask.rows() != pred.rows() || mask.cols() != pred.cols()))) {
    Fail(ErrorKind::kInvalidArgument, "1-HL shape mismatch");
  }
  Matrix diff = ((pred.array() != 0.0) != (truth.array() != 0.0)).cast<double>();
  double cells = static_cast<double>(pred.size());
  if (mask.size() != 0) {
    diff.array() *= (mask.array() != 0.0).cast<double>();
    cells = (mask.array() != 0.0).cast<double>().sum();
  }
  if (cells == 0.0) Fail(ErrorKind::kInvalidArgument, "1-HL over zero cells");
  return 1.0 - diff.sum() / cells;
}

std::size_t DefaultK(double mean_labels_per_row) {
  const double k = std::round(mean_labels_per_row);  // half away from zero
  return k < 1.0 ? 1 : static_cast<std::size_t>(k);
}

std::size_t DefaultK(const ScoreMatrix& s) {
  s.Check();
  double positives = 0.0;
  double rows = 0.0;
  for (Eigen::Index r = 0; r < s.truth.rows(); ++r) {
    bool any = false;
    for (Eigen::Index c = 0; c < s.truth.cols(); ++c) {
      if (!s.Active(r, c)) continue;
      any = true;
      positives += s.truth(r, c) != 0.0;
    }
    rows += any;
  }
  return DefaultK(rows > 0 ? positives / rows : 1.0);
}

namespace brute {

double Auroc(std::span<const double> scores, std::span<const double> truth) {
  CheckPair(scores, truth);
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] == 0.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j] != 0.0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  if (pairs == 0.0) Fail(ErrorKind::kInvalidArgument, "AUROC needs both classes");
  return wins / pairs;
}

// Mean over positives of the precision at that positive's score threshold.
double Auprc(std::span<const double> scores, std::span<const double> truth) {
  CheckPair(scores, truth);
  double sum = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truth[i] == 0.0) continue;
    positives += 1.0;
    double above = 0.0, above_pos = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[j] >= scores[i]) {
        above += 1.0;
        above_pos += truth[j] != 0.0;
      }
    }
    sum += above_pos / above;
  }
  if (positives == 0.0) Fail(ErrorKind::kInvalidArgument, "AUPRC needs a positive");
  return sum / positives;
}

MacroResult MacroAuroc(const ScoreMatrix& s) {
  return Macro(s, true, [](const auto& sc, const auto& tr) {
    return brute::Auroc(sc, tr);
  });
}

MacroResult MacroAuprc(const ScoreMatrix& s) {
  return Macro(s, false, [](const auto& sc, const auto& tr) {
    return brute::Auprc(sc, tr);
  });
}

// Selects labels by repeated arg-max scans instead of sorting.
MacroResult AvgF1TopK(const ScoreMatrix& s, std::size_t K) {
  s.Check();
  const Eigen::Index rows = s.scores.rows(), cols = s.scores.cols();
  if (K < 1 || K > static_cast<std::size_t>(cols)) {
    Fail(ErrorKind::kInvalidArgument, "bad K");
  }
  std::vector<std::vector<bool>> pred(static_cast<std::size_t>(rows),
                                      std::vector<bool>(static_cast<std::size_t>(cols)));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < K; ++t) {
      Eigen::Index best = -1;
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!s.Active(r, c) || pred[r][c]) continue;
        if (best < 0 || s.scores(r, c) > s.scores(r, best)) best = c;
      }
      if (best >= 0) pred[r][best] = true;
    }
  }
  MacroResult out;
  double total = 0.0;
  for (Eigen::Index c = 0; c < cols; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      if (!s.Active(r, c)) continue;
      const bool t = s.truth(r, c) != 0.0;
      if (pred[r][c] && t) tp += 1;
      if (pred[r][c] && !t) fp += 1;
      if (!pred[r][c] && t) fn += 1;
    }
    if (tp + fp + fn == 0) {
      ++out.excluded;
      continue;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    total += precision + recall > 0
                 ? 2.0 * precision * recall / (precision + recall)
                 : 0.0;
    ++out.included;
  }
  out.value = out.included ? total / static_cast<double>(out.included) : 0.0;
  return out;
}

double OneMinusHl(const Matrix& pred, const Matrix& truth, const Matrix& mask) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    Fail(ErrorKind::kInvalidArgument, "1-HL shape mismatch");
  }
  double wrong = 0.0, cells = 0.0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (mask.size() != 0 && mask(r, c) == 0.0) continue;
      cells += 1.0;
      if ((pred(r, c) != 0.0) != (truth(r, c) != 0.0)) wrong += 1.0;
    }
  }
  if (cells == 0.0) Fail(ErrorKind::kInvalidArgument, "1-HL over zero cells");
  return 1.0 - wrong / cells;
}

}  // namespace brute

RunMetrics Evaluate(const ScoreMatrix& s, std::size_t K) {
  RunMetrics m;
  m.K = K ? K : DefaultK(s);
  const MacroResult roc = MacroAuroc(s);
  const MacroResult pr = MacroAuprc(s);
  const MacroResult f1 = AvgF1TopK(s, m.K);
  m.auroc = roc.value;
  m.auprc = pr.value;
  m.avg_f1 = f1.value;
  m.one_minus_hl = OneMinusHl(TopKPredictions(s, m.K), s.truth, s.mask);
  m.excluded_labels = roc.excluded;
  return m;
}

namespace {

ReportRow Aggregate(const std::string& name, const std::vector<RunMetrics>& runs,
                    double RunMetrics::*field) {
  ReportRow row;
  row.metric = name;
  row.n_runs = runs.size();
  if (runs.empty()) return row;
  double sum = 0.0;
  for (const auto& r : runs) sum += r.*field;
  row.mean = sum / static_cast<double>(runs.size());
  if (runs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.*field - row.mean) * (r.*field - row.mean);
    row.stddev = std::sqrt(ss / static_cast<double>(runs.size() - 1));
  }
  row.K = runs.front().K;
  std::size_t excluded = 0;
  for (const auto& r : runs) excluded = std::max(excluded, r.excluded_labels);
  row.excluded_labels = excluded;
  return row;
}

}  // namespace

std::vector<ReportRow> Summarize(const std::vector<RunMetrics>& runs) {
  return {Aggregate("auroc", runs, &RunMetrics::auroc),
          Aggregate("auprc", runs, &RunMetrics::auprc),
          Aggregate("avg_f1", runs, &RunMetrics::avg_f1),
          Aggregate("one_minus_hl", runs, &RunMetrics::one_minus_hl)};
}

std::string FormatReport(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "metric\tmean\tstd\tn_runs\tK\texcluded_labels\n";
  for (const auto& r : rows) {
    out << r.metric << "\t" << FormatFixed4(r.mean) << "\t"
        << FormatFixed4(r.stddev) << "\t" << r.n_runs << "\t" << r.K << "\t"
        << r.excluded_labels << "\n";
  }
  return out.str();
}

}  // namespace metamiml
