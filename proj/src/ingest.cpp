#include "cwae/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cwae/binio.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

using nlohmann::json;

constexpr char kDatasetMagic[8] = {'C', 'W', 'A', 'E', 'D', 'S', 'E', 'T'};
constexpr std::uint32_t kDatasetVersion = 1;

std::optional<double> finite_number(std::string_view cell) {
  auto v = parse_double(cell);
  if (v && std::isfinite(*v)) return v;
  return std::nullopt;
}

std::string bin_label(const std::vector<double>& edges, std::size_t bin) {
  const std::string lo = bin == 0 ? "-inf" : format_double(edges[bin - 1]);
  const std::string hi = bin == edges.size() ? "inf" : format_double(edges[bin]);
  return "[" + lo + "," + hi + ")";
}

/// Distinct values, numerically ordered when they all parse as numbers.
std::vector<std::string> ordered_vocabulary(const std::set<std::string>& distinct) {
  std::vector<std::string> vocab(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(vocab.begin(), vocab.end(), [](const std::string& s) {
    return finite_number(s).has_value();
  });
  if (numeric) {
    std::stable_sort(vocab.begin(), vocab.end(), [](const std::string& a, const std::string& b) {
      return *finite_number(a) < *finite_number(b);
    });
  }
  return vocab;
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  const std::size_t n = values.size();
  for (std::size_t k = 1; k < bins; ++k) {
    const double e = values[k * n / bins];
    if (e > values.front() && (edges.empty() || e > edges.back())) edges.push_back(e);
  }
  return edges;
}

/// Fits kind-specific state of `spec` from one raw column.
void fit_column(ColumnSpec& spec, const std::vector<std::string_view>& cells,
                std::size_t numeric_bins) {
  if (spec.kind == ColumnKind::numeric_binned) {
    std::vector<double> values;
    values.reserve(cells.size());
    for (auto c : cells) {
      if (auto v = finite_number(c)) values.push_back(*v);
    }
    if (values.empty()) throw ValidationError("column '" + spec.name + "' has no numeric values");
    spec.bin_edges = quantile_edges(std::move(values), numeric_bins);
    spec.cardinality = spec.bin_edges.size() + 1;
    spec.vocabulary.clear();
    for (std::size_t b = 0; b < spec.cardinality; ++b) {
      spec.vocabulary.push_back(bin_label(spec.bin_edges, b));
    }
    return;
  }
  std::set<std::string> distinct(cells.begin(), cells.end());
  spec.vocabulary = ordered_vocabulary(distinct);
  spec.cardinality = spec.vocabulary.size();
}

std::vector<std::size_t> header_positions(const RawTable& raw,
                                          const std::vector<std::string>& names) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < raw.header.size(); ++i) pos.emplace(raw.header[i], i);
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    auto it = pos.find(n);
    if (it == pos.end()) throw ValidationError("column '" + n + "' not found in table header");
    out.push_back(it->second);
  }
  return out;
}

void check_rows(const RawTable& raw) {
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    if (raw.rows[r].size() != raw.header.size()) {
      throw ValidationError("row " + std::to_string(r + 1) + " has " +
                            std::to_string(raw.rows[r].size()) + " cells, header has " +
                            std::to_string(raw.header.size()));
    }
  }
}

json column_to_json(const ColumnSpec& c) {
  json j;
  j["name"] = c.name;
  j["kind"] = std::string(to_string(c.kind));
  j["cardinality"] = c.cardinality;
  j["bin_edges"] = c.bin_edges;
  j["vocabulary"] = c.vocabulary;
  return j;
}

json schema_json(const DatasetSchema& s) {
  json cols = json::array();
  for (const auto& c : s.columns) cols.push_back(column_to_json(c));
  json j;
  j["label_column"] = s.label_column;
  j["positive_label"] = s.positive_label;
  j["candidate_context_columns"] = s.candidate_context_columns;
  j["columns"] = std::move(cols);
  return j;
}

DatasetSchema schema_from(const json& j) {
  DatasetSchema s;
  s.label_column = j.at("label_column").get<std::string>();
  s.positive_label = j.at("positive_label").get<std::string>();
  s.candidate_context_columns = j.at("candidate_context_columns").get<std::vector<std::string>>();
  for (const auto& cj : j.at("columns")) {
    ColumnSpec c;
    c.name = cj.at("name").get<std::string>();
    const auto kind = cj.at("kind").get<std::string>();
    if (kind == "categorical") c.kind = ColumnKind::categorical;
    else if (kind == "numeric-binned") c.kind = ColumnKind::numeric_binned;
    else throw ValidationError("unknown column kind '" + kind + "'");
    c.cardinality = cj.at("cardinality").get<std::size_t>();
    c.bin_edges = cj.at("bin_edges").get<std::vector<double>>();
    c.vocabulary = cj.at("vocabulary").get<std::vector<std::string>>();
    s.columns.push_back(std::move(c));
  }
  s.validate();
  return s;
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::categorical ? "categorical" : "numeric-binned";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::int32_t ColumnSpec::encode(std::string_view cell) const {
  if (kind == ColumnKind::numeric_binned) {
    const auto v = finite_number(cell);
    if (!v) return 0;
    // Out-of-range values clamp to the first/last bin.
    return static_cast<std::int32_t>(
        1 + (std::upper_bound(bin_edges.begin(), bin_edges.end(), *v) - bin_edges.begin()));
  }
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    if (vocabulary[i] == cell) return static_cast<std::int32_t>(i + 1);
  }
  return 0;
}

std::string ColumnSpec::decode(std::int32_t index) const {
  if (index <= 0 || static_cast<std::size_t>(index) > vocabulary.size()) return {};
  return vocabulary[static_cast<std::size_t>(index) - 1];
}

std::optional<std::size_t> DatasetSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t DatasetSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ValidationError("unknown column '" + std::string(name) + "'");
}

std::vector<std::string> DatasetSchema::column_names() const {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

void DatasetSchema::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) throw ValidationError("duplicate column name '" + c.name + "'");
    if (c.name == label_column) {
      throw ValidationError("label column '" + c.name + "' listed as a feature");
    }
    if (c.cardinality < 1) throw ValidationError("column '" + c.name + "' has cardinality 0");
    if (c.vocabulary.size() != c.cardinality) {
      throw ValidationError("column '" + c.name + "' vocabulary size != cardinality");
    }
    if (c.kind == ColumnKind::numeric_binned) {
      if (c.bin_edges.size() + 1 != c.cardinality) {
        throw ValidationError("column '" + c.name + "' bin count != cardinality");
      }
      if (std::adjacent_find(c.bin_edges.begin(), c.bin_edges.end(),
                             std::greater_equal<>()) != c.bin_edges.end()) {
        throw ValidationError("column '" + c.name + "' bin edges not strictly increasing");
      }
    } else if (!c.bin_edges.empty()) {
      throw ValidationError("categorical column '" + c.name + "' carries bin edges");
    }
  }
  for (const auto& cand : candidate_context_columns) {
    if (cand == label_column) throw ValidationError("label column cannot be a context candidate");
    if (!seen.contains(cand)) throw ValidationError("unknown context candidate '" + cand + "'");
  }
}

DatasetSchema infer_schema(const RawTable& raw, const InferOptions& options) {
  if (raw.header.empty()) throw ValidationError("table has no header");
  if (raw.rows.empty()) throw ValidationError("table has no data rows");
  if (options.numeric_bins < 1) throw ValidationError("numeric_bins must be positive");
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : raw.header) {
      if (!seen.insert(h).second) throw ValidationError("duplicate column name '" + h + "'");
    }
    if (!options.label_column.empty() && !seen.contains(options.label_column)) {
      throw ValidationError("label column '" + options.label_column + "' not in table header");
    }
    for (const auto& d : options.drop_columns) {
      if (!seen.contains(d)) throw ValidationError("drop column '" + d + "' not in table header");
    }
  }
  check_rows(raw);

  const std::unordered_set<std::string> dropped(options.drop_columns.begin(),
                                                options.drop_columns.end());
  DatasetSchema schema;
  schema.label_column = options.label_column;
  schema.positive_label = options.positive_label;

  for (std::size_t col = 0; col < raw.header.size(); ++col) {
    const std::string& name = raw.header[col];
    if (name == options.label_column || dropped.contains(name)) continue;
    std::vector<std::string_view> cells;
    cells.reserve(raw.rows.size());
    for (const auto& row : raw.rows) cells.emplace_back(row[col]);

    std::set<std::string> distinct(cells.begin(), cells.end());
    const bool all_numeric = std::all_of(cells.begin(), cells.end(), [](std::string_view c) {
      return finite_number(c).has_value();
    });

    ColumnSpec spec;
    spec.name = name;
    if (all_numeric && distinct.size() > options.numeric_bins) {
      spec.kind = ColumnKind::numeric_binned;
    }
    fit_column(spec, cells, options.numeric_bins);
    schema.columns.push_back(std::move(spec));
  }

  schema.candidate_context_columns = options.candidate_context_columns.empty()
                                         ? schema.column_names()
                                         : options.candidate_context_columns;
  schema.validate();
  return schema;
}

std::vector<std::size_t> EncodedTable::rows_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (split[r] == s) out.push_back(r);
  }
  return out;
}

std::size_t EncodedTable::count(Split s) const {
  return static_cast<std::size_t>(std::count(split.begin(), split.end(), s));
}

std::size_t EncodedTable::anomaly_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

std::vector<std::int32_t> EncodedTable::column(std::size_t col,
                                               std::span<const std::size_t> rows) const {
  std::vector<std::int32_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(at(r, col));
  return out;
}

void EncodedTable::validate() const {
  schema.validate();
  if (n_cols != schema.columns.size()) throw ValidationError("table width != schema width");
  if (cells.size() != n_rows * n_cols || labels.size() != n_rows || split.size() != n_rows) {
    throw ValidationError("table buffers inconsistent with row count");
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_cols; ++c) {
      const auto v = at(r, c);
      if (v < 0 || static_cast<std::size_t>(v) > schema.columns[c].cardinality) {
        throw ValidationError("encoded index out of range in column '" + schema.columns[c].name + "'");
      }
    }
    if (labels[r] > 1) throw ValidationError("label not binary");
    if (labels[r] == 1 && split[r] != Split::test) {
      throw ValidationError("anomalous row assigned to a train/val split");
    }
  }
}

EncodedTable encode_table(const RawTable& raw, const DatasetSchema& schema,
                          VocabSource vocab_source) {
  check_rows(raw);
  const auto feature_pos = header_positions(raw, schema.column_names());
  const auto label_pos = header_positions(raw, {schema.label_column}).front();

  EncodedTable table;
  table.schema = schema;
  table.n_rows = raw.rows.size();
  table.n_cols = schema.columns.size();

  if (vocab_source == VocabSource::fit) {
    // Bin edges belong to the schema; only categorical vocabularies refit.
    for (std::size_t c = 0; c < table.n_cols; ++c) {
      ColumnSpec& spec = table.schema.columns[c];
      if (spec.kind == ColumnKind::numeric_binned) continue;
      std::vector<std::string_view> cells;
      cells.reserve(raw.rows.size());
      for (const auto& row : raw.rows) cells.emplace_back(row[feature_pos[c]]);
      fit_column(spec, cells, 0);
    }
    table.schema.validate();
  }

  table.cells.resize(table.n_rows * table.n_cols);
  for (std::size_t c = 0; c < table.n_cols; ++c) {
    const ColumnSpec& spec = table.schema.columns[c];
    std::unordered_map<std::string_view, std::int32_t> lookup;
    if (spec.kind == ColumnKind::categorical) {
      for (std::size_t i = 0; i < spec.vocabulary.size(); ++i) {
        lookup.emplace(spec.vocabulary[i], static_cast<std::int32_t>(i + 1));
      }
    }
    for (std::size_t r = 0; r < table.n_rows; ++r) {
      const std::string& cell = raw.rows[r][feature_pos[c]];
      std::int32_t idx;
      if (spec.kind == ColumnKind::categorical) {
        auto it = lookup.find(cell);
        idx = it == lookup.end() ? 0 : it->second;
      } else {
        idx = spec.encode(cell);
      }
      table.cells[r * table.n_cols + c] = idx;
    }
  }

  std::set<std::string_view> label_values;
  table.labels.resize(table.n_rows);
  for (std::size_t r = 0; r < table.n_rows; ++r) {
    const std::string& cell = raw.rows[r][label_pos];
    label_values.insert(cell);
    table.labels[r] = cell == schema.positive_label ? 1 : 0;
  }
  if (label_values.size() > 2) {
    throw ValidationError("label column '" + schema.label_column + "' is not binary (" +
                          std::to_string(label_values.size()) + " distinct values)");
  }
  if (label_values.size() == 2 && !label_values.contains(schema.positive_label)) {
    throw ValidationError("label column '" + schema.label_column + "' never equals positive label '" +
                          schema.positive_label + "'");
  }
  // Anomalies are held in test until split_dataset assigns the normals.
  table.split.resize(table.n_rows);
  for (std::size_t r = 0; r < table.n_rows; ++r) {
    table.split[r] = table.labels[r] ? Split::test : Split::train;
  }
  return table;
}

EncodedTable split_dataset(EncodedTable table, const SplitOptions& options) {
  if (!(options.val_fraction > 0.0 && options.val_fraction < 1.0) ||
      !(options.test_fraction > 0.0 && options.test_fraction < 1.0) ||
      !(options.val_fraction + options.test_fraction < 1.0)) {
    throw ValidationError("split fractions must lie in (0,1) and sum to less than 1");
  }
  std::vector<std::size_t> normals;
  for (std::size_t r = 0; r < table.n_rows; ++r) {
    if (table.labels[r] == 0) normals.push_back(r);
  }
  if (normals.empty()) throw ValidationError("dataset has no normal rows to train on");

  Rng rng(options.seed);
  rng.shuffle(std::span<std::size_t>(normals));
  const auto n = static_cast<double>(normals.size());
  const auto n_val = static_cast<std::size_t>(std::llround(options.val_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * n));
  if (n_val + n_test >= normals.size()) {
    throw ValidationError("split leaves no normal rows for training");
  }
  for (std::size_t r = 0; r < table.n_rows; ++r) {
    if (table.labels[r] == 1) table.split[r] = Split::test;
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    Split s = Split::train;
    if (i < n_val) s = Split::val;
    else if (i < n_val + n_test) s = Split::test;
    table.split[normals[i]] = s;
  }
  return table;
}

double ContextDistribution::probability(std::int32_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= probabilities.size()) {
    return probabilities.empty() ? 0.0 : probabilities.front();
  }
  return probabilities[static_cast<std::size_t>(index)];
}

ContextDistribution context_distribution(const EncodedTable& table, std::string_view column) {
  const std::size_t col = table.schema.index_of(column);
  const std::size_t card = table.schema.columns[col].cardinality;
  std::vector<double> counts(card + 1, 0.0);
  std::size_t n_train = 0;
  for (std::size_t r = 0; r < table.n_rows; ++r) {
    if (table.split[r] != Split::train) continue;
    counts[static_cast<std::size_t>(table.at(r, col))] += 1.0;
    ++n_train;
  }
  if (n_train == 0) throw ValidationError("context_distribution: empty train split");

  ContextDistribution dist;
  dist.column = std::string(column);
  const double denom = static_cast<double>(n_train + card + 1);
  dist.probabilities.resize(card + 1);
  for (std::size_t i = 0; i <= card; ++i) dist.probabilities[i] = (counts[i] + 1.0) / denom;
  return dist;
}

DatasetStats dataset_stats(const EncodedTable& table) {
  DatasetStats s;
  s.rows = table.n_rows;
  s.features = table.n_cols;
  s.anomalies = table.anomaly_count();
  s.anomaly_ratio = table.n_rows ? static_cast<double>(s.anomalies) / static_cast<double>(s.rows) : 0.0;
  double total = 0.0;
  for (const auto& c : table.schema.columns) total += static_cast<double>(c.cardinality);
  s.average_cardinality = table.n_cols ? total / static_cast<double>(table.n_cols) : 0.0;
  return s;
}

std::string schema_to_json(const DatasetSchema& schema) { return schema_json(schema).dump(); }

DatasetSchema schema_from_json(std::string_view text) {
  try {
    return schema_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed schema: ") + e.what());
  }
}

std::string schema_fingerprint(const DatasetSchema& schema) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(schema_to_json(schema))));
  return buf;
}

void save_encoded(const std::filesystem::path& path, const EncodedTable& table,
                  std::string_view dataset_name) {
  table.validate();
  json header;
  header["name"] = std::string(dataset_name);
  header["n_rows"] = table.n_rows;
  header["n_cols"] = table.n_cols;
  header["schema"] = schema_json(table.schema);

  ByteWriter w;
  w.put_raw(std::string_view(kDatasetMagic, sizeof(kDatasetMagic)));
  w.put<std::uint32_t>(kDatasetVersion);
  w.put_string(header.dump());
  for (auto v : table.cells) w.put<std::int32_t>(v);
  for (auto l : table.labels) w.put<std::uint8_t>(l);
  for (auto s : table.split) w.put<std::uint8_t>(static_cast<std::uint8_t>(s));
  write_file(path, w.bytes());
}

EncodedTable load_encoded(const std::filesystem::path& path, std::string* dataset_name) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes, "dataset file '" + path.string() + "'");
  if (r.get_raw(sizeof(kDatasetMagic)) != std::string_view(kDatasetMagic, sizeof(kDatasetMagic))) {
    throw CorruptFileError("'" + path.string() + "' is not an encoded dataset file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw VersionMismatchError("dataset file version " + std::to_string(version) +
                               ", expected " + std::to_string(kDatasetVersion));
  }
  json header;
  try {
    header = json::parse(r.get_string());
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("dataset header: ") + e.what());
  }
  EncodedTable table;
  try {
    table.schema = schema_from(header.at("schema"));
    table.n_rows = header.at("n_rows").get<std::size_t>();
    table.n_cols = header.at("n_cols").get<std::size_t>();
    if (dataset_name) *dataset_name = header.at("name").get<std::string>();
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("dataset header: ") + e.what());
  }
  table.cells.resize(table.n_rows * table.n_cols);
  for (auto& v : table.cells) v = r.get<std::int32_t>();
  table.labels.resize(table.n_rows);
  for (auto& l : table.labels) l = r.get<std::uint8_t>();
  table.split.resize(table.n_rows);
  for (auto& s : table.split) {
    const auto raw = r.get<std::uint8_t>();
    if (raw > 2) throw CorruptFileError("dataset file: bad split tag");
    s = static_cast<Split>(raw);
  }
  if (!r.at_end()) throw CorruptFileError("dataset file: trailing bytes");
  table.validate();
  return table;
}

}  // namespace cwae
