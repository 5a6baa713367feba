#include "cwae/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

// counts[col][value] over every row.
std::vector<std::vector<std::size_t>> value_counts(const EncodedTable& data) {
  std::vector<std::vector<std::size_t>> counts(data.n_cols);
  for (std::size_t c = 0; c < data.n_cols; ++c) {
    counts[c].assign(data.schema.columns[c].cardinality + 1, 0);
  }
  for (std::size_t r = 0; r < data.n_rows; ++r) {
    for (std::size_t c = 0; c < data.n_cols; ++c) ++counts[c][static_cast<std::size_t>(data.at(r, c))];
  }
  return counts;
}

void split_rows(const EncodedTable& data, std::vector<std::size_t>& anomalies,
                std::vector<std::size_t>& normals) {
  for (std::size_t r = 0; r < data.n_rows; ++r) (data.labels[r] ? anomalies : normals).push_back(r);
}

void require_features(const EncodedTable& data) {
  if (data.n_cols == 0) throw ValidationError("complexity: table has no features");
}

double hamming_similarity(const EncodedTable& data, std::size_t a, std::size_t b) {
  std::size_t same = 0;
  for (std::size_t c = 0; c < data.n_cols; ++c) same += data.at(a, c) == data.at(b, c) ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(data.n_cols);
}

}  // namespace

double k_vcc(const EncodedTable& data, std::uint64_t seed, std::size_t max_pairs) {
  require_features(data);
  std::vector<std::size_t> anomalies, normals;
  split_rows(data, anomalies, normals);
  const std::size_t n = anomalies.size();
  if (n < 2) throw ValidationError("K_vcc needs at least 2 anomalies");
  if (max_pairs == 0) throw ValidationError("K_vcc: max_pairs must be positive");

  const std::size_t all_pairs = n * (n - 1) / 2;
  double sum = 0.0;
  if (all_pairs <= max_pairs) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) sum += hamming_similarity(data, anomalies[i], anomalies[j]);
    }
    return sum / static_cast<double>(all_pairs);
  }
  Rng rng(derive_seed(seed, "k_vcc"));
  for (std::size_t p = 0; p < max_pairs; ++p) {
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    sum += hamming_similarity(data, anomalies[i], anomalies[j]);
  }
  return sum / static_cast<double>(max_pairs);
}

double k_het(const EncodedTable& data) {
  require_features(data);
  if (data.n_rows == 0) throw ValidationError("K_het: empty table");
  const auto counts = value_counts(data);
  std::size_t lo = data.n_rows;
  std::size_t hi = 0;
  for (const auto& col : counts) {
    const std::size_t mode = *std::max_element(col.begin(), col.end());
    lo = std::min(lo, mode);
    hi = std::max(hi, mode);
  }
  return static_cast<double>(hi) / static_cast<double>(lo);
}

double k_ins(const EncodedTable& data) {
  require_features(data);
  std::vector<std::size_t> anomalies, normals;
  split_rows(data, anomalies, normals);
  if (anomalies.empty()) throw ValidationError("K_ins needs at least 1 anomaly");
  if (normals.empty()) throw ValidationError("K_ins needs at least 1 normal row");
  const auto counts = value_counts(data);

  double sum = 0.0;
  std::vector<std::size_t> normal_freq(normals.size());
  for (std::size_t c = 0; c < data.n_cols; ++c) {
    for (std::size_t i = 0; i < normals.size(); ++i) {
      normal_freq[i] = counts[c][static_cast<std::size_t>(data.at(normals[i], c))];
    }
    std::sort(normal_freq.begin(), normal_freq.end());
    for (std::size_t a : anomalies) {
      const std::size_t f = counts[c][static_cast<std::size_t>(data.at(a, c))];
      const auto rarer = std::lower_bound(normal_freq.begin(), normal_freq.end(), f) - normal_freq.begin();
      sum += static_cast<double>(rarer) / static_cast<double>(normals.size());
    }
  }
  return sum / static_cast<double>(anomalies.size() * data.n_cols);
}

double k_fnl(const EncodedTable& data) {
  require_features(data);
  std::vector<std::size_t> anomalies, normals;
  split_rows(data, anomalies, normals);
  if (anomalies.empty()) throw ValidationError("K_fnl needs at least 1 anomaly");
  if (normals.empty()) throw ValidationError("K_fnl needs at least 1 normal row");
  const auto counts = value_counts(data);

  auto mean_freq = [&](const std::vector<std::size_t>& rows, std::size_t c) {
    double s = 0.0;
    for (std::size_t r : rows) s += static_cast<double>(counts[c][static_cast<std::size_t>(data.at(r, c))]);
    return s / static_cast<double>(rows.size());
  };
  std::size_t noisy = 0;
  for (std::size_t c = 0; c < data.n_cols; ++c) {
    if (mean_freq(anomalies, c) >= mean_freq(normals, c)) ++noisy;
  }
  return static_cast<double>(noisy) / static_cast<double>(data.n_cols);
}

RawComplexity compute_complexity(const EncodedTable& data, std::string dataset, std::uint64_t seed) {
  RawComplexity out;
  out.dataset = std::move(dataset);
  const std::array<std::function<double()>, kMetricCount> metrics{
      [&] { return k_vcc(data, seed); },
      [&] { return k_het(data); },
      [&] { return k_ins(data); },
      [&] { return k_fnl(data); },
  };
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    try {
      out.raw[m] = metrics[m]();
    } catch (const ValidationError& e) {
      out.errors[m] = e.what();
    }
  }
  return out;
}

std::vector<ComplexityReport> scale_and_rank(std::span<const RawComplexity> raw) {
  if (raw.size() < 2) throw ValidationError("complexity scaling needs at least 2 datasets");
  std::vector<ComplexityReport> out(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d) out[d].dataset = raw[d].dataset;

  for (std::size_t m = 0; m < kMetricCount; ++m) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& r : raw) {
      if (!r.raw[m]) continue;
      if (!std::isfinite(*r.raw[m])) throw ValidationError("complexity: non-finite raw score for " + r.dataset);
      lo = std::min(lo, *r.raw[m]);
      hi = std::max(hi, *r.raw[m]);
    }
    for (std::size_t d = 0; d < raw.size(); ++d) {
      MetricScore& s = out[d].metrics[m];
      s.raw = raw[d].raw[m];
      if (!s.raw) continue;
      s.scaled = hi > lo ? (*s.raw - lo) / (hi - lo) : 0.0;
      s.rank = 1;
      for (const auto& other : raw) {
        if (other.raw[m] && *other.raw[m] > *s.raw) ++s.rank;
      }
    }
  }
  for (auto& r : out) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : r.metrics) {
      if (!s.raw) continue;
      sum += s.scaled;
      ++n;
    }
    r.avg_scaled = n == 0 ? 0.0 : sum / static_cast<double>(n);
  }
  for (auto& r : out) {
    r.overall_rank = 1;
    for (const auto& other : out) {
      if (other.avg_scaled > r.avg_scaled) ++r.overall_rank;
    }
  }
  return out;
}

std::string format_complexity_csv(std::span<const ComplexityReport> reports) {
  std::string out = "dataset";
  for (auto name : kMetricNames) {
    out += ',' + std::string(name) + "_raw," + std::string(name) + "_scaled," + std::string(name) +
           "_rank";
  }
  out += ",avg_scaled,overall_rank\n";
  for (const auto& r : reports) {
    out += csv_escape(r.dataset);
    for (const auto& s : r.metrics) {
      if (s.raw) {
        out += ',' + format_double(*s.raw) + ',' + format_double(s.scaled) + ',' +
               std::to_string(s.rank);
      } else {
        out += ",,,";
      }
    }
    out += ',' + format_double(r.avg_scaled) + ',' + std::to_string(r.overall_rank) + '\n';
  }
  return out;
}

std::vector<RawComplexity> parse_raw_scores_csv(std::string_view text) {
  const RawTable t = parse_csv(text);
  std::vector<std::size_t> at(kMetricCount);
  if (t.header.empty() || t.header[0] != "dataset") {
    throw ValidationError("raw scores csv: first column must be 'dataset'");
  }
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    const auto it = std::find(t.header.begin(), t.header.end(), kMetricNames[m]);
    if (it == t.header.end()) {
      throw ValidationError("raw scores csv: missing column " + std::string(kMetricNames[m]));
    }
    at[m] = static_cast<std::size_t>(it - t.header.begin());
  }
  std::vector<RawComplexity> out;
  for (const auto& cells : t.rows) {
    if (cells.size() != t.header.size()) throw ValidationError("raw scores csv: ragged row");
    RawComplexity r;
    r.dataset = cells[0];
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const std::string& cell = cells[at[m]];
      if (cell.empty()) {
        r.errors[m] = "missing";
        continue;
      }
      const auto v = parse_double(cell);
      if (!v) throw ValidationError("raw scores csv: bad number '" + cell + "'");
      r.raw[m] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cwae
