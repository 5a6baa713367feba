#include "cwae/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"

namespace cwae {
namespace {

constexpr double kMinThreshold = std::numeric_limits<double>::min();

void require_both_classes(std::span<const ScoreRecord> records, std::size_t& pos,
                          std::size_t& neg) {
  pos = 0;
  for (const auto& r : records) pos += r.anomaly ? 1 : 0;
  neg = records.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DegenerateLabelsError("AUC needs both normal and anomalous rows (got " +
                                std::to_string(pos) + " anomalies, " + std::to_string(neg) +
                                " normals)");
  }
}

}  // namespace

double ThresholdTable::threshold_for(std::int32_t context_value) const {
  const auto it = thresholds.find(context_value);
  return it == thresholds.end() ? global_fallback : it->second;
}

ThresholdTable fit_thresholds(std::span<const double> scores,
                              std::span<const std::int32_t> contexts,
                              std::string context_column) {
  if (scores.empty()) throw ValidationError("fit_thresholds: no training scores");
  if (!contexts.empty() && contexts.size() != scores.size()) {
    throw ValidationError("fit_thresholds: scores and contexts differ in length");
  }
  ThresholdTable t;
  t.context_column = std::move(context_column);
  t.global_fallback = kMinThreshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DivergenceError("fit_thresholds: non-finite score");
    t.global_fallback = std::max(t.global_fallback, scores[i]);
    if (!contexts.empty()) {
      auto [it, inserted] = t.thresholds.try_emplace(contexts[i], kMinThreshold);
      it->second = std::max(it->second, scores[i]);
    }
  }
  return t;
}

std::vector<ScoreRecord> contextual_ratios(std::span<const std::size_t> rows,
                                           std::span<const double> scores,
                                           std::span<const std::int32_t> contexts,
                                           std::span<const std::uint8_t> labels,
                                           const ThresholdTable& table) {
  if (rows.size() != scores.size() || labels.size() != scores.size() ||
      (!contexts.empty() && contexts.size() != scores.size())) {
    throw ValidationError("contextual_ratios: inputs differ in length");
  }
  std::vector<ScoreRecord> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ScoreRecord& r = out[i];
    r.row = rows[i];
    r.score = scores[i];
    r.context = contexts.empty() ? 0 : contexts[i];
    r.anomaly = labels[i] != 0;
    const double h = contexts.empty() ? table.global_fallback : table.threshold_for(r.context);
    r.ratio = r.score / h;
  }
  return out;
}

RocReport aucroc_grid(std::span<const ScoreRecord> records) {
  RocReport roc;
  require_both_classes(records, roc.positives, roc.negatives);
  double max_ratio = 0.0;
  for (const auto& r : records) max_ratio = std::max(max_ratio, r.ratio);

  std::vector<std::pair<double, double>> points{{0.0, 0.0}, {1.0, 1.0}};
  for (std::size_t k = 1; k <= kGridSteps; ++k) {
    const double tau = 0.01 * static_cast<double>(k) * max_ratio;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& r : records) {
      if (r.ratio > tau) ++(r.anomaly ? tp : fp);
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(roc.positives);
    const double fpr = static_cast<double>(fp) / static_cast<double>(roc.negatives);
    roc.thresholds.push_back(tau);
    roc.tpr.push_back(tpr);
    roc.fpr.push_back(fpr);
    points.emplace_back(fpr, tpr);
  }
  std::sort(points.begin(), points.end());
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2;
  }
  roc.aucroc = std::clamp(area, 0.0, 1.0);
  return roc;
}

double exact_auc(std::span<const ScoreRecord> records) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  require_both_classes(records, pos, neg);
  double wins = 0.0;
  for (const auto& p : records) {
    if (!p.anomaly) continue;
    for (const auto& n : records) {
      if (n.anomaly) continue;
      if (p.ratio > n.ratio) {
        wins += 1.0;
      } else if (p.ratio == n.ratio) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double VarianceDecomposition::within_ratio() const { return total == 0.0 ? 0.0 : within / total; }

VarianceDecomposition variance_decomposition(std::span<const double> y,
                                             std::span<const std::int32_t> groups) {
  if (y.size() < 2) throw ValidationError("variance_decomposition: needs at least 2 rows");
  if (groups.size() != y.size()) {
    throw ValidationError("variance_decomposition: values and groups differ in length");
  }
  const double n = static_cast<double>(y.size());
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;

  struct Group {
    double count = 0.0;
    double sum = 0.0;
  };
  std::map<std::int32_t, Group> by_group;
  for (std::size_t i = 0; i < y.size(); ++i) {
    Group& g = by_group[groups[i]];
    g.count += 1.0;
    g.sum += y[i];
  }
  std::map<std::int32_t, double> group_ss;

  VarianceDecomposition d;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const Group& g = by_group[groups[i]];
    const double dev = y[i] - mean;
    const double within_dev = y[i] - g.sum / g.count;
    d.total += dev * dev;
    group_ss[groups[i]] += within_dev * within_dev;
  }
  d.total /= n;
  for (const auto& [key, g] : by_group) {
    const double p = g.count / n;
    const double gm = g.sum / g.count;
    d.within += p * (group_ss[key] / g.count);
    d.between += p * (gm - mean) * (gm - mean);
  }
  return d;
}

CategoricalVarianceReport variance_decomposition(const EncodedTable& table,
                                                 std::string_view context_column,
                                                 std::span<const std::size_t> rows) {
  const std::size_t ctx = table.schema.index_of(context_column);
  const std::vector<std::int32_t> groups = table.column(ctx, rows);
  CategoricalVarianceReport report;
  report.context_column = std::string(context_column);
  std::vector<double> indicator(rows.size());
  for (std::size_t col = 0; col < table.n_cols; ++col) {
    if (col == ctx) continue;
    const ColumnSpec& spec = table.schema.columns[col];
    const std::vector<std::int32_t> values = table.column(col, rows);
    std::vector<std::int32_t> seen(values);
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (std::int32_t v : seen) {
      for (std::size_t i = 0; i < values.size(); ++i) indicator[i] = values[i] == v ? 1.0 : 0.0;
      OneHotVariance dim{spec.name, v == 0 ? std::string("<unseen>") : spec.decode(v),
                         variance_decomposition(indicator, groups)};
      report.summed.total += dim.parts.total;
      report.summed.within += dim.parts.within;
      report.summed.between += dim.parts.between;
      report.dimensions.push_back(std::move(dim));
    }
  }
  return report;
}

std::vector<PlotRow> threshold_plot_rows(const ThresholdTable& table, const DatasetSchema& schema) {
  std::vector<PlotRow> rows;
  if (table.context_column.empty()) {
    rows.push_back({"thresholds", "global", table.global_fallback});
    return rows;
  }
  const ColumnSpec& spec = schema.columns[schema.index_of(table.context_column)];
  for (const auto& [value, h] : table.thresholds) {
    rows.push_back({"thresholds", value == 0 ? std::string("<unseen>") : spec.decode(value), h});
  }
  return rows;
}

std::vector<PlotRow> roc_plot_rows(const RocReport& roc, std::string_view series) {
  std::vector<PlotRow> rows;
  for (std::size_t k = 0; k < roc.fpr.size(); ++k) {
    rows.push_back({std::string(series), format_double(roc.fpr[k]), roc.tpr[k]});
  }
  return rows;
}

std::string format_plot_csv(std::span<const PlotRow> rows) {
  std::string out = "series,x,y\n";
  for (const auto& r : rows) {
    out += csv_escape(r.series);
    out += ',';
    out += csv_escape(r.x);
    out += ',';
    out += format_double(r.y);
    out += '\n';
  }
  return out;
}

std::vector<PlotRow> parse_plot_csv(std::string_view text) {
  const RawTable t = parse_csv(text);
  if (t.header != std::vector<std::string>{"series", "x", "y"}) {
    throw ValidationError("plot csv: expected header series,x,y");
  }
  std::vector<PlotRow> rows;
  for (const auto& cells : t.rows) {
    if (cells.size() != 3) throw ValidationError("plot csv: expected 3 fields per line");
    const auto y = parse_double(cells[2]);
    if (!y) throw ValidationError("plot csv: bad number '" + cells[2] + "'");
    rows.push_back({cells[0], cells[1], *y});
  }
  return rows;
}

void write_plot_csv(const std::filesystem::path& path, std::span<const PlotRow> rows) {
  write_file(path, format_plot_csv(rows));
}

}  // namespace cwae
