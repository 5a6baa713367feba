#pragma once

// Dataset manifests and run configuration files (both JSON).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwae/ingest.hpp"
#include "cwae/model.hpp"
#include "cwae/trainer.hpp"

namespace cwae {

struct Manifest {
  std::string name;
  /// Resolved against the manifest's directory when relative.
  std::filesystem::path csv;
  std::string label_column;
  std::string positive_label = "1";
  std::vector<std::string> candidate_context_columns;  // empty = all features
  std::vector<std::string> drop_columns;
  std::size_t numeric_bins = 10;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  /// Context used by `--context best`.
  std::optional<std::string> best_context;

  InferOptions infer_options() const;
  SplitOptions split_options() const;
};

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

struct SelectionSettings {
  /// Overrides of the training batch size / learning rate for the one-epoch
  /// candidate runs; 0 keeps the training values.
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  std::size_t curve_epochs = 0;
  bool include_no_context = true;
};

struct RunConfig {
  std::optional<std::filesystem::path> manifest;
  ModelConfig model;  // context/content/seed are filled per run
  TrainConfig train;  // seed is filled per run
  SelectionSettings selection;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::optional<std::filesystem::path> out_dir;
  std::size_t jobs = 1;

  void validate() const;
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace cwae
