#include "cwae/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "cwae/error.hpp"
#include "cwae/ops.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

using nlohmann::json;

constexpr std::size_t kScoreChunk = 1024;

Parameter uniform_param(std::string name, std::vector<std::size_t> shape, double bound,
                        Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return Parameter(std::move(name), std::move(t));
}

void init_stack(const std::string& prefix, std::size_t in, const std::vector<std::size_t>& hidden,
                std::size_t out, std::vector<Parameter>& weights, std::vector<Parameter>& biases,
                Rng& rng) {
  std::vector<std::size_t> widths = hidden;
  widths.push_back(out);
  std::size_t fan_in = in;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::string base = prefix + "/" + std::to_string(l);
    weights.push_back(uniform_param(base + "/weight", {fan_in, widths[l]},
                                    1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
    biases.emplace_back(base + "/bias", Tensor({widths[l]}));
    fan_in = widths[l];
  }
}

void check_config(const ModelConfig& config, const DatasetSchema& schema) {
  if (config.embed_dim == 0 || config.latent_dim == 0) {
    throw ValidationError("model: embed_dim and latent_dim must be positive");
  }
  for (auto w : config.encoder_hidden) {
    if (w == 0) throw ValidationError("model: zero-width encoder layer");
  }
  for (auto w : config.decoder_hidden) {
    if (w == 0) throw ValidationError("model: zero-width decoder layer");
  }
  if (!(config.lambda_mmd >= 0.0)) throw ValidationError("model: lambda_mmd must be >= 0");
  if (config.mmd_sigma < 0.0) throw ValidationError("model: mmd_sigma must be >= 0");
  if (config.content_columns.empty()) throw ValidationError("model: no content columns");

  std::unordered_set<std::string> seen;
  for (const auto& c : config.context_columns) {
    schema.index_of(c);
    if (!seen.insert(c).second) throw ValidationError("model: column '" + c + "' listed twice");
  }
  for (const auto& c : config.content_columns) {
    schema.index_of(c);
    if (!seen.insert(c).second) {
      throw ValidationError("model: column '" + c + "' is both context and content");
    }
  }
  if (seen.size() != schema.columns.size()) {
    throw ValidationError("model: context and content columns must cover every feature column");
  }
}

/// MLP forward, keeping every layer input and pre-activation.
void stack_forward(const Tensor& input, const std::vector<Parameter>& weights,
                   const std::vector<Parameter>& biases, std::vector<Tensor>& inputs,
                   std::vector<Tensor>& pre) {
  inputs.clear();
  pre.clear();
  Tensor x = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Tensor y = affine_forward(x, weights[l], biases[l]);
    inputs.push_back(std::move(x));
    x = l + 1 < weights.size() ? relu_forward(y) : Tensor();
    pre.push_back(std::move(y));
  }
}

Tensor stack_backward(std::vector<Parameter>& weights, std::vector<Parameter>& biases,
                      const std::vector<Tensor>& inputs, const std::vector<Tensor>& pre,
                      Tensor grad) {
  for (std::size_t l = weights.size(); l-- > 0;) {
    if (l + 1 < weights.size()) grad = relu_backward(pre[l], grad);
    grad = affine_backward(inputs[l], weights[l], biases[l], grad);
  }
  return grad;
}

/// Splits grad columns back into per-part tensors of the given widths.
std::vector<Tensor> split_cols(const Tensor& grad, std::size_t offset,
                               const std::vector<Tensor>& parts) {
  std::vector<Tensor> out;
  for (const Tensor& p : parts) {
    out.push_back(slice_cols(grad, offset, p.cols()));
    offset += p.cols();
  }
  return out;
}

}  // namespace

ModelConfig ModelConfig::for_context(const DatasetSchema& schema,
                                     std::vector<std::string> context_columns,
                                     ModelConfig base) {
  for (const auto& c : context_columns) schema.index_of(c);
  base.context_columns = std::move(context_columns);
  base.content_columns.clear();
  for (const auto& c : schema.columns) {
    if (std::find(base.context_columns.begin(), base.context_columns.end(), c.name) ==
        base.context_columns.end()) {
      base.content_columns.push_back(c.name);
    }
  }
  return base;
}

ModelConfig ModelConfig::for_context(const DatasetSchema& schema,
                                     std::vector<std::string> context_columns) {
  return for_context(schema, std::move(context_columns), ModelConfig{});
}

double ModelConfig::sigma() const {
  return mmd_sigma > 0.0 ? mmd_sigma : default_mmd_sigma(latent_dim);
}

std::string model_config_to_json(const ModelConfig& c) {
  json j;
  j["context_columns"] = c.context_columns;
  j["content_columns"] = c.content_columns;
  j["embed_dim"] = c.embed_dim;
  j["encoder_hidden"] = c.encoder_hidden;
  j["latent_dim"] = c.latent_dim;
  j["decoder_hidden"] = c.decoder_hidden;
  j["lambda_mmd"] = c.lambda_mmd;
  j["mmd_sigma"] = c.mmd_sigma;
  j["mmd_on_final_latent"] = c.mmd_on_final_latent;
  j["seed"] = c.seed;
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ModelConfig c;
    c.context_columns = j.at("context_columns").get<std::vector<std::string>>();
    c.content_columns = j.at("content_columns").get<std::vector<std::string>>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.encoder_hidden = j.at("encoder_hidden").get<std::vector<std::size_t>>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.decoder_hidden = j.at("decoder_hidden").get<std::vector<std::size_t>>();
    c.lambda_mmd = j.at("lambda_mmd").get<double>();
    c.mmd_sigma = j.at("mmd_sigma").get<double>();
    c.mmd_on_final_latent = j.at("mmd_on_final_latent").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  }
}

std::vector<Parameter*> CwaeParams::all() {
  std::vector<Parameter*> out;
  for (auto& p : context_embeddings) out.push_back(&p);
  for (auto& p : content_embeddings) out.push_back(&p);
  for (std::size_t l = 0; l < encoder_weights.size(); ++l) {
    out.push_back(&encoder_weights[l]);
    out.push_back(&encoder_biases[l]);
  }
  for (std::size_t l = 0; l < decoder_weights.size(); ++l) {
    out.push_back(&decoder_weights[l]);
    out.push_back(&decoder_biases[l]);
  }
  return out;
}

std::vector<const Parameter*> CwaeParams::all() const {
  std::vector<const Parameter*> out;
  for (Parameter* p : const_cast<CwaeParams*>(this)->all()) out.push_back(p);
  return out;
}

CwaeParams init_params(const ModelConfig& config, const DatasetSchema& schema) {
  check_config(config, schema);
  Rng rng(config.seed);
  CwaeParams p;
  auto embedding = [&](const std::string& prefix, const std::string& col) {
    const std::size_t rows = schema.columns[schema.index_of(col)].cardinality + 1;
    return uniform_param(prefix + "/" + col, {rows, config.embed_dim}, 0.05, rng);
  };
  for (const auto& c : config.context_columns) p.context_embeddings.push_back(embedding("ctx_embed", c));
  for (const auto& c : config.content_columns) p.content_embeddings.push_back(embedding("embed", c));

  const std::size_t n_ctx = config.context_columns.size();
  const std::size_t n_all = n_ctx + config.content_columns.size();
  std::size_t decoder_out = 0;
  for (const auto& c : config.content_columns) {
    decoder_out += schema.columns[schema.index_of(c)].cardinality + 1;
  }
  init_stack("encoder", n_all * config.embed_dim, config.encoder_hidden, config.latent_dim,
             p.encoder_weights, p.encoder_biases, rng);
  init_stack("decoder", config.latent_dim + n_ctx * config.embed_dim, config.decoder_hidden,
             decoder_out, p.decoder_weights, p.decoder_biases, rng);
  return p;
}

Batch Batch::gather(const EncodedTable& table, std::span<const std::size_t> rows) {
  Batch b;
  b.size = rows.size();
  b.n_cols = table.n_cols;
  b.cells.reserve(rows.size() * table.n_cols);
  for (std::size_t r : rows) {
    const auto src = table.row(r);
    b.cells.insert(b.cells.end(), src.begin(), src.end());
  }
  return b;
}

std::vector<std::int32_t> Batch::column(std::size_t col) const {
  std::vector<std::int32_t> out(size);
  for (std::size_t r = 0; r < size; ++r) out[r] = cells[r * n_cols + col];
  return out;
}

struct CwaeModel::Cache {
  std::vector<std::vector<std::int32_t>> ctx_idx;
  std::vector<std::vector<std::int32_t>> cont_idx;
  std::vector<Tensor> ctx_emb;
  std::vector<Tensor> cont_emb;
  std::vector<Tensor> enc_in;
  std::vector<Tensor> enc_pre;
  std::vector<Tensor> dec_in;
  std::vector<Tensor> dec_pre;
  Tensor final_latent;

  const Tensor& z() const { return enc_pre.back(); }
  const Tensor& logits() const { return dec_pre.back(); }
};

CwaeModel::CwaeModel(ModelConfig config, const DatasetSchema& schema)
    : CwaeModel(config, schema, init_params(config, schema)) {}

CwaeModel::CwaeModel(ModelConfig config, const DatasetSchema& schema, CwaeParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  check_config(config_, schema);
  for (const auto& c : config_.context_columns) context_cols_.push_back(schema.index_of(c));
  std::size_t offset = 0;
  for (const auto& c : config_.content_columns) {
    const std::size_t idx = schema.index_of(c);
    content_cols_.push_back(idx);
    widths_.push_back(schema.columns[idx].cardinality + 1);
    offsets_.push_back(offset);
    offset += widths_.back();
  }
  if (params_.context_embeddings.size() != context_cols_.size() ||
      params_.content_embeddings.size() != content_cols_.size() ||
      params_.encoder_weights.size() != config_.encoder_hidden.size() + 1 ||
      params_.decoder_weights.size() != config_.decoder_hidden.size() + 1 ||
      params_.decoder_weights.back().value.cols() != offset) {
    throw ValidationError("model: parameters do not match configuration");
  }
}

std::size_t CwaeModel::context_column_index() const {
  if (context_cols_.empty()) throw ValidationError("model has no context column");
  return context_cols_.front();
}

std::size_t CwaeModel::mmd_dim() const {
  return config_.mmd_on_final_latent
             ? config_.latent_dim + context_cols_.size() * config_.embed_dim
             : config_.latent_dim;
}

void CwaeModel::forward_into(const Batch& batch, Cache& c) const {
  std::vector<const Tensor*> parts;
  for (std::size_t i = 0; i < context_cols_.size(); ++i) {
    c.ctx_idx.push_back(batch.column(context_cols_[i]));
    c.ctx_emb.push_back(embedding_forward(params_.context_embeddings[i], c.ctx_idx.back()));
  }
  for (std::size_t i = 0; i < content_cols_.size(); ++i) {
    c.cont_idx.push_back(batch.column(content_cols_[i]));
    c.cont_emb.push_back(embedding_forward(params_.content_embeddings[i], c.cont_idx.back()));
  }
  for (const Tensor& t : c.ctx_emb) parts.push_back(&t);
  for (const Tensor& t : c.cont_emb) parts.push_back(&t);
  const Tensor encoder_in = concat_cols(parts);
  stack_forward(encoder_in, params_.encoder_weights, params_.encoder_biases, c.enc_in,
                c.enc_pre);

  parts.clear();
  parts.push_back(&c.z());
  for (const Tensor& t : c.ctx_emb) parts.push_back(&t);
  c.final_latent = concat_cols(parts);
  stack_forward(c.final_latent, params_.decoder_weights, params_.decoder_biases, c.dec_in,
                c.dec_pre);
}

CwaeModel::Forward CwaeModel::forward(const Batch& batch) const {
  Cache c;
  forward_into(batch, c);
  Forward out{c.logits(), {c.z(), c.final_latent}, {}};
  for (std::size_t l = 0; l + 1 < c.enc_pre.size(); ++l) out.hidden_preactivations.push_back(c.enc_pre[l]);
  for (std::size_t l = 0; l + 1 < c.dec_pre.size(); ++l) out.hidden_preactivations.push_back(c.dec_pre[l]);
  return out;
}

namespace {

struct Objective {
  LossValue value;
  Tensor grad_logits;
  Tensor grad_mmd_input;
};

Objective evaluate(const Tensor& logits, const std::vector<std::vector<std::int32_t>>& targets,
                   const std::vector<std::size_t>& widths,
                   const std::vector<std::size_t>& offsets, const Tensor& mmd_input,
                   const Tensor* prior, double lambda, double sigma, bool with_grad,
                   std::vector<double>* per_row) {
  Objective o;
  const std::size_t batch = logits.rows();
  std::vector<double> nll(batch, 0.0);
  if (with_grad) o.grad_logits = Tensor::matrix(batch, logits.cols());
  const double scale = 1.0 / static_cast<double>(batch);
  for (std::size_t k = 0; k < widths.size(); ++k) {
    o.value.recon += softmax_cross_entropy_block(logits, offsets[k], widths[k], targets[k], nll,
                                                 with_grad ? &o.grad_logits : nullptr, scale);
  }
  if (prior != nullptr) {
    Mmd m = rbf_mmd(mmd_input, *prior, sigma, with_grad && lambda != 0.0);
    o.value.mmd = m.value;
    if (with_grad && lambda != 0.0) {
      for (double& g : m.grad_z.values()) g *= lambda;
      o.grad_mmd_input = std::move(m.grad_z);
    }
  }
  o.value.total = o.value.recon + lambda * o.value.mmd;
  if (!std::isfinite(o.value.total)) {
    throw DivergenceError("non-finite loss (recon " + std::to_string(o.value.recon) + ", mmd " +
                          std::to_string(o.value.mmd) + ")");
  }
  if (per_row) *per_row = std::move(nll);
  return o;
}

}  // namespace

LossValue CwaeModel::loss(const Batch& batch, const Tensor& prior_samples) const {
  if (batch.size == 0) throw ValidationError("loss: empty batch");
  Cache c;
  forward_into(batch, c);
  const Tensor& mmd_in = config_.mmd_on_final_latent ? c.final_latent : c.z();
  return evaluate(c.logits(), c.cont_idx, widths_, offsets_, mmd_in, &prior_samples,
                  config_.lambda_mmd, config_.sigma(), false, nullptr)
      .value;
}

LossValue CwaeModel::loss_and_backward(const Batch& batch, const Tensor& prior_samples) {
  if (batch.size == 0) throw ValidationError("loss: empty batch");
  Cache c;
  forward_into(batch, c);
  const bool on_final = config_.mmd_on_final_latent;
  Objective o = evaluate(c.logits(), c.cont_idx, widths_, offsets_,
                         on_final ? c.final_latent : c.z(), &prior_samples, config_.lambda_mmd,
                         config_.sigma(), true, nullptr);

  Tensor grad_final = stack_backward(params_.decoder_weights, params_.decoder_biases, c.dec_in,
                                     c.dec_pre, std::move(o.grad_logits));
  if (on_final && !o.grad_mmd_input.empty()) {
    for (std::size_t i = 0; i < grad_final.size(); ++i) grad_final[i] += o.grad_mmd_input[i];
  }
  Tensor grad_z = slice_cols(grad_final, 0, config_.latent_dim);
  if (!on_final && !o.grad_mmd_input.empty()) {
    for (std::size_t i = 0; i < grad_z.size(); ++i) grad_z[i] += o.grad_mmd_input[i];
  }
  const std::vector<Tensor> grad_ctx_direct = split_cols(grad_final, config_.latent_dim, c.ctx_emb);

  const Tensor grad_in = stack_backward(params_.encoder_weights, params_.encoder_biases, c.enc_in,
                                        c.enc_pre, std::move(grad_z));
  const std::vector<Tensor> grad_ctx_enc = split_cols(grad_in, 0, c.ctx_emb);
  const std::size_t ctx_width = context_cols_.size() * config_.embed_dim;
  const std::vector<Tensor> grad_cont = split_cols(grad_in, ctx_width, c.cont_emb);

  for (std::size_t i = 0; i < context_cols_.size(); ++i) {
    embedding_backward(params_.context_embeddings[i], c.ctx_idx[i], grad_ctx_direct[i]);
    embedding_backward(params_.context_embeddings[i], c.ctx_idx[i], grad_ctx_enc[i]);
  }
  for (std::size_t i = 0; i < content_cols_.size(); ++i) {
    embedding_backward(params_.content_embeddings[i], c.cont_idx[i], grad_cont[i]);
  }
  return o.value;
}

std::vector<double> CwaeModel::anomaly_score(const Batch& batch) const {
  if (batch.size == 0) return {};
  Cache c;
  forward_into(batch, c);
  std::vector<double> nll;
  evaluate(c.logits(), c.cont_idx, widths_, offsets_, c.z(), nullptr, 0.0, 1.0, false, &nll);
  return nll;
}

std::vector<double> CwaeModel::anomaly_score(const EncodedTable& table,
                                             std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += kScoreChunk) {
    const auto chunk = rows.subspan(start, std::min(kScoreChunk, rows.size() - start));
    const auto scores = anomaly_score(Batch::gather(table, chunk));
    out.insert(out.end(), scores.begin(), scores.end());
  }
  return out;
}

}  // namespace cwae
