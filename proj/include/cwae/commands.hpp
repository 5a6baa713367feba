#pragma once

// The pipeline steps behind each CLI subcommand. Report files never contain
// timings or absolute paths, so identical runs give identical bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwae/complexity.hpp"
#include "cwae/evaluator.hpp"
#include "cwae/ingest.hpp"
#include "cwae/manifest.hpp"
#include "cwae/selector.hpp"
#include "cwae/trainer.hpp"

namespace cwae {

struct IngestResult {
  EncodedTable table;
  DatasetStats stats;
};

/// Reads, encodes and splits the manifest's CSV and writes the dataset file.
IngestResult cmd_ingest(const Manifest& manifest, const std::filesystem::path& out_file);

/// "name: rows R, features F, anomalies A (P%), avg cardinality C"
std::string format_stats(std::string_view name, const DatasetStats& stats);

struct ContextChoice {
  enum class Mode { named, none, automatic, best };
  Mode mode = Mode::automatic;
  std::string name;

  /// "<column>", "none", "auto" or "best".
  static ContextChoice parse(std::string_view text);
};

/// Model and train configs for a final (post-selection) run.
ModelConfig final_model_config(const EncodedTable& table, const RunConfig& config,
                               const std::vector<std::string>& context, std::uint64_t seed);
TrainConfig final_train_config(const RunConfig& config, std::uint64_t seed);
SelectionOptions selection_options(const RunConfig& config, std::uint64_t seed);

struct ModelEvaluation {
  double aucroc = 0.0;
  double exact_auc = 0.0;
  ThresholdTable thresholds;
  RocReport roc;
  TrainReport train;
};

/// Trains one final model, fits thresholds on train scores and scores the
/// test split. Throws DegenerateLabelsError when the test split lacks a class.
ModelEvaluation evaluate_model(const EncodedTable& table, const std::vector<std::string>& context,
                               const RunConfig& config, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double cwae_auc = 0.0;
  double wae_auc = 0.0;
  double cwae_exact_auc = 0.0;
  double wae_exact_auc = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
};

MeanStd mean_std(const std::vector<double>& values);

struct ContextSweepEntry {
  std::string context;
  std::vector<double> auc;
  MeanStd summary;
};

struct RunSummary {
  std::string dataset;
  std::string context;  // column name or NO_CONTEXT
  std::vector<SeedResult> seeds;
  MeanStd cwae;
  MeanStd wae;
  std::optional<double> complexity_avg_scaled;
  std::optional<double> within_variance_ratio;
  std::optional<SelectionReport> selection;
  std::vector<ContextSweepEntry> sweep;  // with --sweep-best
  std::vector<std::string> files;        // relative to the output directory
};

struct EvaluateOptions {
  ContextChoice context;
  bool sweep_best = false;
  /// Used when context.mode == best.
  std::optional<std::string> best_context;
};

RunSummary cmd_evaluate(const EncodedTable& table, std::string_view dataset,
                        const EvaluateOptions& options, const RunConfig& config,
                        const std::filesystem::path& out_dir);

std::string run_summary_json(const RunSummary& summary);

/// Runs the sweep with config.seeds.front() and writes selection.json and
/// plots/selection_curves.csv.
SelectionReport cmd_select_context(const EncodedTable& table, const RunConfig& config,
                                   const std::filesystem::path& out_dir,
                                   std::vector<std::string>* files = nullptr);

/// Trains one model per seed and writes a checkpoint plus a loss report.
std::vector<std::filesystem::path> cmd_train(const EncodedTable& table,
                                             const std::vector<std::string>& context,
                                             const RunConfig& config,
                                             const std::filesystem::path& out_dir);

struct NamedTable {
  std::string name;
  EncodedTable table;
};

std::vector<ComplexityReport> cmd_complexity(std::span<const NamedTable> datasets,
                                             const std::filesystem::path& out_file,
                                             std::uint64_t seed = 0);
std::vector<ComplexityReport> cmd_complexity_from_raw(const std::filesystem::path& raw_scores_csv,
                                                      const std::filesystem::path& out_file);

/// Collects evaluation.json files into one CSV, optionally joining the
/// avg_scaled column of a complexity CSV.
std::string cmd_report(std::span<const std::filesystem::path> summaries,
                       const std::optional<std::filesystem::path>& complexity_csv,
                       const std::filesystem::path& out_file);

}  // namespace cwae
