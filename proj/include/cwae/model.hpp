#pragma once

// Conditional Wasserstein autoencoder over categorical columns.
//
//   [ctx embeddings | content embeddings] -> encoder FC stack -> z
//   [z | ctx embeddings]                  -> decoder FC stack -> logits
//
// The decoder emits one logit block of width cardinality + 1 per content
// column. The loss is the summed per-column cross-entropy plus lambda times
// the RBF MMD between z and a standard normal sample. With no context columns
// the same code is the plain WAE baseline.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwae/ingest.hpp"
#include "cwae/tensor.hpp"

namespace cwae {

struct ModelConfig {
  std::vector<std::string> context_columns;
  std::vector<std::string> content_columns;
  std::size_t embed_dim = 16;
  std::vector<std::size_t> encoder_hidden{64};
  std::size_t latent_dim = 32;
  std::vector<std::size_t> decoder_hidden{64};
  double lambda_mmd = 1.0;
  /// 0 selects sqrt(latent_dim / 2).
  double mmd_sigma = 0.0;
  /// Regularize [z | ctx] instead of z alone. Off by default.
  bool mmd_on_final_latent = false;
  std::uint64_t seed = 0;

  /// Context as given, every other schema column as content (schema order).
  /// Throws ValidationError for a context name the schema lacks.
  static ModelConfig for_context(const DatasetSchema& schema,
                                 std::vector<std::string> context_columns,
                                 ModelConfig base);
  static ModelConfig for_context(const DatasetSchema& schema,
                                 std::vector<std::string> context_columns);

  bool is_wae() const { return context_columns.empty(); }
  double sigma() const;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

struct CwaeParams {
  std::vector<Parameter> context_embeddings;
  std::vector<Parameter> content_embeddings;
  std::vector<Parameter> encoder_weights;
  std::vector<Parameter> encoder_biases;
  std::vector<Parameter> decoder_weights;
  std::vector<Parameter> decoder_biases;

  /// Fixed order: context embeddings, content embeddings, encoder (W, b per
  /// layer), decoder (W, b per layer).
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
};

/// Seeded init: embeddings ~ U(-0.05, 0.05), weights ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), biases 0.
CwaeParams init_params(const ModelConfig& config, const DatasetSchema& schema);

/// Rows gathered out of an EncodedTable (all schema columns).
struct Batch {
  std::size_t size = 0;
  std::size_t n_cols = 0;
  std::vector<std::int32_t> cells;  // row-major

  static Batch gather(const EncodedTable& table, std::span<const std::size_t> rows);
  std::vector<std::int32_t> column(std::size_t col) const;
};

struct LatentCode {
  Tensor encoder_out;   // [B x latent_dim]
  Tensor final_latent;  // [B x (latent_dim + sum of context embed dims)]
};

struct LossValue {
  double total = 0.0;
  double recon = 0.0;
  double mmd = 0.0;
};

class CwaeModel {
 public:
  CwaeModel(ModelConfig config, const DatasetSchema& schema);
  CwaeModel(ModelConfig config, const DatasetSchema& schema, CwaeParams params);

  const ModelConfig& config() const { return config_; }
  CwaeParams& params() { return params_; }
  const CwaeParams& params() const { return params_; }

  std::size_t content_count() const { return content_cols_.size(); }
  /// Logit block width (cardinality + 1) per content column.
  const std::vector<std::size_t>& content_widths() const { return widths_; }
  std::size_t context_column_index() const;
  /// Width of the vector the MMD term regularizes.
  std::size_t mmd_dim() const;

  struct Forward {
    Tensor logits;  // [B x sum of content widths]
    LatentCode latent;
    /// Pre-ReLU activations of every hidden layer, encoder first.
    std::vector<Tensor> hidden_preactivations;
  };
  Forward forward(const Batch& batch) const;

  /// Loss only (no gradients).
  LossValue loss(const Batch& batch, const Tensor& prior_samples) const;

  /// Loss and gradients; gradients are accumulated into params().
  LossValue loss_and_backward(const Batch& batch, const Tensor& prior_samples);

  /// Per-row summed cross-entropy, i.e. -log P(Y | C) under the model.
  std::vector<double> anomaly_score(const Batch& batch) const;
  std::vector<double> anomaly_score(const EncodedTable& table,
                                    std::span<const std::size_t> rows) const;

 private:
  struct Cache;
  void forward_into(const Batch& batch, Cache& cache) const;

  ModelConfig config_;
  std::vector<std::size_t> context_cols_;
  std::vector<std::size_t> content_cols_;
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  CwaeParams params_;
};

}  // namespace cwae
