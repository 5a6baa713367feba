#pragma once

// Contextual thresholds, ratio scores, grid ROC and the variance diagnostic.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwae/ingest.hpp"

namespace cwae {

struct ThresholdTable {
  /// Empty for the global (no context) table.
  std::string context_column;
  std::map<std::int32_t, double> thresholds;  // context index -> H_c
  double global_fallback = 0.0;

  /// H_c, or the global fallback for a value with no training rows.
  double threshold_for(std::int32_t context_value) const;
};

/// H_c = max training score within each context value. `contexts` is empty
/// for the global table, otherwise parallel to `scores`. Thresholds are
/// floored at the smallest normal double so ratios stay finite.
ThresholdTable fit_thresholds(std::span<const double> scores,
                              std::span<const std::int32_t> contexts,
                              std::string context_column = {});

struct ScoreRecord {
  std::size_t row = 0;
  double score = 0.0;
  std::int32_t context = 0;
  double ratio = 0.0;
  bool anomaly = false;
};

/// R = score / H_c. `contexts` may be empty for the global table.
std::vector<ScoreRecord> contextual_ratios(std::span<const std::size_t> rows,
                                           std::span<const double> scores,
                                           std::span<const std::int32_t> contexts,
                                           std::span<const std::uint8_t> labels,
                                           const ThresholdTable& table);

inline constexpr std::size_t kGridSteps = 100;

struct RocReport {
  std::vector<double> thresholds;  // tau_k = 0.01 k max(R), k = 1..100
  std::vector<double> fpr;
  std::vector<double> tpr;
  double aucroc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Predict anomalous iff R > tau. The area is the trapezoid rule over the grid
/// points sorted by (FPR, TPR) with (0,0) and (1,1) added.
/// Throws DegenerateLabelsError unless both classes are present.
RocReport aucroc_grid(std::span<const ScoreRecord> records);

/// P(R_pos > R_neg) + P(tie) / 2 by counting every pair.
double exact_auc(std::span<const ScoreRecord> records);

struct VarianceDecomposition {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;

  double sum() const { return within + between; }
  /// within / total; 0 when total is 0.
  double within_ratio() const;
};

/// Population variances of y, grouped by `groups` (parallel to y).
VarianceDecomposition variance_decomposition(std::span<const double> y,
                                             std::span<const std::int32_t> groups);

struct OneHotVariance {
  std::string column;
  std::string value;
  VarianceDecomposition parts;
};

struct CategoricalVarianceReport {
  std::string context_column;
  std::vector<OneHotVariance> dimensions;
  /// Sums over every one-hot dimension.
  VarianceDecomposition summed;
};

/// One-hot expands every content column over the given rows and decomposes
/// each indicator by the context column.
CategoricalVarianceReport variance_decomposition(const EncodedTable& table,
                                                 std::string_view context_column,
                                                 std::span<const std::size_t> rows);

/// One line of a long-format plot file.
struct PlotRow {
  std::string series;
  std::string x;
  double y = 0.0;
};

std::vector<PlotRow> threshold_plot_rows(const ThresholdTable& table, const DatasetSchema& schema);
std::vector<PlotRow> roc_plot_rows(const RocReport& roc, std::string_view series);

/// "series,x,y" header plus one line per row.
std::string format_plot_csv(std::span<const PlotRow> rows);
std::vector<PlotRow> parse_plot_csv(std::string_view text);
void write_plot_csv(const std::filesystem::path& path, std::span<const PlotRow> rows);

}  // namespace cwae
