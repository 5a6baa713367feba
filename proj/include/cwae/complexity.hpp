#pragma once

// Dataset complexity metrics and the scale/rank table built from them.
//
// Value frequencies are counted over the whole table (normal and anomalous
// rows alike).

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwae/ingest.hpp"

namespace cwae {

inline constexpr std::size_t kMetricCount = 4;
inline constexpr std::array<std::string_view, kMetricCount> kMetricNames{"K_vcc", "K_het", "K_ins",
                                                                         "K_fnl"};

inline constexpr std::size_t kMaxAnomalyPairs = 10000;

/// Mean Hamming similarity over anomaly pairs. Every pair is used when there
/// are at most max_pairs of them, otherwise max_pairs seeded random pairs.
double k_vcc(const EncodedTable& data, std::uint64_t seed = 0,
             std::size_t max_pairs = kMaxAnomalyPairs);

/// max_j p_mode(j) / min_j p_mode(j).
double k_het(const EncodedTable& data);

/// Mean over (anomaly, feature) of the fraction of normal rows whose value is
/// strictly rarer than the anomaly's value.
double k_ins(const EncodedTable& data);

/// Fraction of features where the mean anomaly-value frequency is at least
/// the mean normal-value frequency.
double k_fnl(const EncodedTable& data);

struct RawComplexity {
  std::string dataset;
  /// nullopt when the metric's precondition failed; see errors.
  std::array<std::optional<double>, kMetricCount> raw;
  std::array<std::string, kMetricCount> errors;
};

/// All four metrics; a failing metric is recorded instead of thrown.
RawComplexity compute_complexity(const EncodedTable& data, std::string dataset,
                                 std::uint64_t seed = 0);

struct MetricScore {
  std::optional<double> raw;
  double scaled = 0.0;
  std::size_t rank = 0;  // 0 when raw is missing
};

struct ComplexityReport {
  std::string dataset;
  std::array<MetricScore, kMetricCount> metrics;
  double avg_scaled = 0.0;
  std::size_t overall_rank = 0;
};

/// Per-metric min-max scaling (a constant metric scales to 0), competition
/// ranks by descending raw score, the mean scaled score over the available
/// metrics, and competition ranks by descending mean. Missing metrics are
/// left out of that metric's scaling and ranking.
std::vector<ComplexityReport> scale_and_rank(std::span<const RawComplexity> raw);

/// dataset, then raw/scaled/rank per metric, avg_scaled, overall_rank.
std::string format_complexity_csv(std::span<const ComplexityReport> reports);

/// Reads "dataset,K_vcc,K_het,K_ins,K_fnl" rows (blank cell = missing).
std::vector<RawComplexity> parse_raw_scores_csv(std::string_view text);

}  // namespace cwae
