#pragma once

// Context selection by joint validation loss -log P(Y|C) - log P(C).
//
// Each candidate column gets a fresh model trained for one epoch; the model
// with no context is always scored too. The smallest joint loss wins.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwae/evaluator.hpp"
#include "cwae/ingest.hpp"
#include "cwae/model.hpp"
#include "cwae/trainer.hpp"

namespace cwae {

inline constexpr std::string_view kNoContext = "NO_CONTEXT";

struct CandidateResult {
  std::string candidate;  // column name or NO_CONTEXT
  double conditional_nll = 0.0;
  double context_nll = 0.0;
  double joint_loss = 0.0;
  double train_seconds = 0.0;
  bool failed = false;
  std::string failure;
  /// Joint loss after each epoch of the optional longer run (plotting only).
  std::vector<double> curve;
};

struct SelectionReport {
  /// Ascending joint loss; failed candidates last.
  std::vector<CandidateResult> candidates;
  std::string chosen;
  std::uint64_t seed = 0;

  bool chose_no_context() const { return chosen == kNoContext; }
};

struct SelectionOptions {
  ModelConfig model;  // context/content columns are filled in per candidate
  TrainConfig train;  // epochs is forced to 1 for scoring
  std::uint64_t seed = 0;
  bool include_no_context = true;
  /// Worker threads; 0 uses the hardware concurrency.
  std::size_t jobs = 1;
  /// When > 1, also record per-epoch joint losses over this many epochs.
  std::size_t curve_epochs = 0;
};

/// conditional_nll + mean(-log P(c)) over the given context indices; with no
/// distribution (no context) it returns conditional_nll unchanged.
double joint_val_loss(double conditional_nll, const ContextDistribution* distribution,
                      std::span<const std::int32_t> val_context_values);

/// Deterministic per-candidate seed.
std::uint64_t candidate_seed(std::uint64_t base, std::string_view candidate);

/// Trains and scores one candidate; never throws for divergence (marks it
/// failed instead).
CandidateResult score_candidate(const EncodedTable& data, std::string_view candidate,
                                const SelectionOptions& options);

/// Throws ValidationError for unknown/empty candidates or an empty val split,
/// DivergenceError when every candidate failed.
SelectionReport select_context(const EncodedTable& data, std::span<const std::string> candidates,
                               const SelectionOptions& options);

std::string selection_report_json(const SelectionReport& report);

/// series = candidate, x = epoch, y = joint loss.
std::vector<PlotRow> selection_plot_rows(const SelectionReport& report);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are
/// rethrown on the caller (the first one by index).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace cwae
