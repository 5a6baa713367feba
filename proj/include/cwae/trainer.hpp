#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwae/ingest.hpp"
#include "cwae/model.hpp"
#include "cwae/optim.hpp"

namespace cwae {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct EpochStats {
  double train_total = 0.0;  // mean over batches
  double train_recon = 0.0;
  double train_mmd = 0.0;
  /// Mean validation NLL after the epoch; nullopt without a val split.
  std::optional<double> val_recon;
  double seconds = 0.0;
};

struct TrainReport {
  /// Loss of the very first batch before any update.
  double initial_batch_loss = 0.0;
  std::vector<EpochStats> epochs;
};

/// Mini-batch Adam over the train split. The final partial batch is kept. The
/// shuffle order and the prior samples come from two generators derived from
/// tcfg.seed, so (seed, data, config) fix the whole trajectory. When `state`
/// is given, training resumes from (and updates) that optimizer state.
/// Throws DivergenceError when a batch loss is not finite.
TrainReport train(CwaeModel& model, const TrainConfig& tcfg, const EncodedTable& data,
                  AdamState* state = nullptr);

/// Mean anomaly score over the val split, i.e. mean -log P(Y | C).
double validation_nll(const CwaeModel& model, const EncodedTable& data);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  ModelConfig config;
  std::string schema_fingerprint;
  CwaeParams params;
  AdamState optimizer;
  std::uint64_t train_seed = 0;
  std::uint64_t epoch = 0;
};

Checkpoint make_checkpoint(const CwaeModel& model, const DatasetSchema& schema,
                           const AdamState& optimizer, std::uint64_t train_seed,
                           std::uint64_t epoch);

/// Rebuilds the model, refusing a schema with a different fingerprint.
CwaeModel restore_model(const Checkpoint& checkpoint, const DatasetSchema& schema);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws CorruptFileError, VersionMismatchError, or (when
/// expected_fingerprint is set and differs) SchemaMismatchError.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_fingerprint = std::nullopt);

}  // namespace cwae
