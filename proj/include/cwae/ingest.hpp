#pragma once

// Tabular ingestion: schema inference, categorical encoding, train/val/test
// splitting and the empirical context distribution.
//
// Every feature ends up categorical. Numeric columns with more distinct values
// than the bin budget are quantile-binned first. Each column's indices run
// 1..cardinality; index 0 is reserved for values the vocabulary has not seen.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwae/csv.hpp"

namespace cwae {

enum class ColumnKind { categorical, numeric_binned };

std::string_view to_string(ColumnKind kind);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::categorical;
  /// Distinct observed values (or bins), excluding the reserved slot 0.
  std::size_t cardinality = 0;
  /// Interior bin edges, strictly increasing; numeric_binned only.
  std::vector<double> bin_edges;
  /// vocabulary[i] is the value (or bin label) encoded as index i + 1.
  std::vector<std::string> vocabulary;

  std::int32_t encode(std::string_view cell) const;
  /// Inverse of encode for indices 1..cardinality; "" for the reserved slot.
  std::string decode(std::int32_t index) const;
};

struct DatasetSchema {
  std::vector<ColumnSpec> columns;  // features only; the label is not a column
  std::string label_column;
  std::string positive_label = "1";
  std::vector<std::string> candidate_context_columns;

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws ValidationError for an unknown column.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::string> column_names() const;
  void validate() const;
};

struct InferOptions {
  std::size_t numeric_bins = 10;
  std::string label_column;
  std::string positive_label = "1";
  /// Empty selects every feature column.
  std::vector<std::string> candidate_context_columns;
  std::vector<std::string> drop_columns;
};

/// Kinds, cardinalities, bin edges and vocabularies for every feature column.
DatasetSchema infer_schema(const RawTable& raw, const InferOptions& options);

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

std::string_view to_string(Split split);

struct EncodedTable {
  DatasetSchema schema;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::int32_t> cells;  // row-major n_rows x n_cols
  std::vector<std::uint8_t> labels;  // 1 = anomaly
  std::vector<Split> split;

  std::int32_t at(std::size_t row, std::size_t col) const { return cells[row * n_cols + col]; }
  std::span<const std::int32_t> row(std::size_t r) const {
    return {cells.data() + r * n_cols, n_cols};
  }
  std::vector<std::size_t> rows_in(Split s) const;
  std::size_t count(Split s) const;
  std::size_t anomaly_count() const;
  /// Column values for the given rows.
  std::vector<std::int32_t> column(std::size_t col, std::span<const std::size_t> rows) const;
  void validate() const;
};

enum class VocabSource { fit, existing };

/// Maps cells to indices. With VocabSource::fit the categorical vocabularies
/// are refitted on this table (bin edges always come from the schema); with
/// existing the schema is used as-is and unseen categorical values land on
/// index 0. Normal rows start in train, anomalies in test.
EncodedTable encode_table(const RawTable& raw, const DatasetSchema& schema,
                          VocabSource vocab_source);

struct SplitOptions {
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// All anomalies go to test. Normal rows are shuffled with the seed and cut
/// into val, test and train in that order.
EncodedTable split_dataset(EncodedTable table, const SplitOptions& options);

struct ContextDistribution {
  std::string column;
  /// probabilities[i] = P(index i), i = 0..cardinality, add-one smoothed.
  std::vector<double> probabilities;

  double probability(std::int32_t index) const;
};

/// P(c) = (count(c) + 1) / (n_train + cardinality + 1) over train rows.
ContextDistribution context_distribution(const EncodedTable& table, std::string_view column);

/// Summary line for ingest output.
struct DatasetStats {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::size_t anomalies = 0;
  double anomaly_ratio = 0.0;
  double average_cardinality = 0.0;
};

DatasetStats dataset_stats(const EncodedTable& table);

/// Versioned binary dataset file, see README for the byte layout.
void save_encoded(const std::filesystem::path& path, const EncodedTable& table,
                  std::string_view dataset_name);
EncodedTable load_encoded(const std::filesystem::path& path, std::string* dataset_name = nullptr);

/// Canonical JSON text of the schema; stable across runs.
std::string schema_to_json(const DatasetSchema& schema);
DatasetSchema schema_from_json(std::string_view text);

/// FNV-1a of the canonical schema JSON, as 16 hex digits.
std::string schema_fingerprint(const DatasetSchema& schema);

}  // namespace cwae
