#include "cwae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "cwae/binio.hpp"
#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

constexpr char kCheckpointMagic[8] = {'C', 'W', 'A', 'E', 'C', 'K', 'P', 'T'};

Tensor standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void put_tensor(ByteWriter& w, std::string_view name, const Tensor& t) {
  w.put_string(name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.put<std::uint64_t>(d);
  for (double v : t.values()) w.put<double>(v);
}

std::pair<std::string, Tensor> get_tensor(ByteReader& r) {
  std::string name = r.get_string();
  const auto rank = r.get<std::uint32_t>();
  if (rank > 8) throw CorruptFileError("checkpoint: implausible tensor rank");
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = static_cast<std::size_t>(r.get<std::uint64_t>());
    count *= d;
  }
  if (count * sizeof(double) > r.remaining()) throw CorruptFileError("checkpoint: truncated tensor");
  std::vector<double> values(count);
  for (double& v : values) v = r.get<double>();
  return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

}  // namespace

TrainReport train(CwaeModel& model, const TrainConfig& tcfg, const EncodedTable& data,
                  AdamState* state) {
  if (tcfg.batch_size == 0) throw ValidationError("train: batch_size must be positive");
  if (!(tcfg.learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
  std::vector<std::size_t> rows = data.rows_in(Split::train);
  if (rows.empty()) throw ValidationError("train: empty train split");

  TrainReport report;
  if (tcfg.epochs == 0) return report;

  const std::vector<Parameter*> params = model.params().all();
  for (Parameter* p : params) p->zero_grad();
  AdamState local;
  if (state == nullptr) state = &local;
  if (state->first_moment.empty()) {
    *state = AdamState::for_params(params, AdamConfig{tcfg.learning_rate});
  }
  state->config.learning_rate = tcfg.learning_rate;

  Rng shuffle_rng(derive_seed(tcfg.seed, "shuffle"));
  Rng prior_rng(derive_seed(tcfg.seed, "prior"));
  const bool has_val = data.count(Split::val) > 0;
  bool first_batch = true;

  for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (tcfg.shuffle) shuffle_rng.shuffle(std::span<std::size_t>(rows));

    EpochStats stats;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < rows.size(); b += tcfg.batch_size) {
      const std::span<const std::size_t> ids(rows.data() + b,
                                             std::min(tcfg.batch_size, rows.size() - b));
      const Batch batch = Batch::gather(data, ids);
      const Tensor prior = standard_normal(batch.size, model.mmd_dim(), prior_rng);
      LossValue loss;
      try {
        loss = model.loss_and_backward(batch, prior);
      } catch (const DivergenceError& e) {
        throw DivergenceError("epoch " + std::to_string(epoch + 1) + ", batch " +
                              std::to_string(batches + 1) + ": " + e.what());
      }
      if (first_batch) {
        report.initial_batch_loss = loss.total;
        first_batch = false;
      }
      adam_step(params, *state);
      stats.train_total += loss.total;
      stats.train_recon += loss.recon;
      stats.train_mmd += loss.mmd;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    stats.train_total /= nb;
    stats.train_recon /= nb;
    stats.train_mmd /= nb;
    if (has_val) stats.val_recon = validation_nll(model, data);
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(stats);
  }
  return report;
}

double validation_nll(const CwaeModel& model, const EncodedTable& data) {
  const std::vector<std::size_t> rows = data.rows_in(Split::val);
  if (rows.empty()) throw ValidationError("validation_nll: empty validation split");
  const std::vector<double> scores = model.anomaly_score(data, rows);
  const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
  const double mean = sum / static_cast<double>(scores.size());
  if (!std::isfinite(mean)) throw DivergenceError("validation_nll: non-finite validation loss");
  return mean;
}

Checkpoint make_checkpoint(const CwaeModel& model, const DatasetSchema& schema,
                           const AdamState& optimizer, std::uint64_t train_seed,
                           std::uint64_t epoch) {
  Checkpoint c;
  c.config = model.config();
  c.schema_fingerprint = schema_fingerprint(schema);
  c.params = model.params();
  c.optimizer = optimizer;
  c.train_seed = train_seed;
  c.epoch = epoch;
  return c;
}

CwaeModel restore_model(const Checkpoint& checkpoint, const DatasetSchema& schema) {
  const std::string fp = schema_fingerprint(schema);
  if (fp != checkpoint.schema_fingerprint) {
    throw SchemaMismatchError("checkpoint was trained on schema " + checkpoint.schema_fingerprint +
                              ", dataset schema is " + fp);
  }
  CwaeModel model(checkpoint.config, schema, checkpoint.params);
  const CwaeParams fresh = init_params(checkpoint.config, schema);
  const auto want = fresh.all();
  const auto have = model.params().all();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->value.shape() != have[i]->value.shape() || want[i]->name != have[i]->name) {
      throw SchemaMismatchError("checkpoint tensor '" + have[i]->name +
                                "' does not match the model layout");
    }
  }
  return model;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.put_raw(std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.put<std::uint32_t>(c.version);
  w.put_string(model_config_to_json(c.config));
  w.put_string(c.schema_fingerprint);

  const auto params = c.params.all();
  w.put<std::uint64_t>(params.size());
  for (const Parameter* p : params) put_tensor(w, p->name, p->value);

  w.put<std::uint64_t>(c.optimizer.step_count);
  w.put<double>(c.optimizer.config.learning_rate);
  w.put<double>(c.optimizer.config.beta1);
  w.put<double>(c.optimizer.config.beta2);
  w.put<double>(c.optimizer.config.epsilon);
  w.put<std::uint64_t>(c.optimizer.first_moment.size());
  for (std::size_t i = 0; i < c.optimizer.first_moment.size(); ++i) {
    put_tensor(w, "adam_m", c.optimizer.first_moment[i]);
    put_tensor(w, "adam_v", c.optimizer.second_moment[i]);
  }
  w.put<std::uint64_t>(c.train_seed);
  w.put<std::uint64_t>(c.epoch);
  return w.bytes();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.get_raw(sizeof(kCheckpointMagic)) !=
      std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw CorruptFileError("not a checkpoint file (bad magic)");
  }
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint format version " + std::to_string(c.version) +
                               ", expected " + std::to_string(kCheckpointVersion));
  }
  try {
    c.config = model_config_from_json(r.get_string());
  } catch (const ValidationError& e) {
    throw CorruptFileError(std::string("checkpoint: ") + e.what());
  }
  c.schema_fingerprint = r.get_string();

  const auto n = r.get<std::uint64_t>();
  const std::size_t n_ctx = c.config.context_columns.size();
  const std::size_t n_cont = c.config.content_columns.size();
  const std::size_t n_enc = c.config.encoder_hidden.size() + 1;
  const std::size_t n_dec = c.config.decoder_hidden.size() + 1;
  if (n != n_ctx + n_cont + 2 * (n_enc + n_dec)) {
    throw CorruptFileError("checkpoint: tensor count does not match its model config");
  }
  auto next = [&] {
    auto [name, t] = get_tensor(r);
    return Parameter(std::move(name), std::move(t));
  };
  for (std::size_t i = 0; i < n_ctx; ++i) c.params.context_embeddings.push_back(next());
  for (std::size_t i = 0; i < n_cont; ++i) c.params.content_embeddings.push_back(next());
  for (std::size_t i = 0; i < n_enc; ++i) {
    c.params.encoder_weights.push_back(next());
    c.params.encoder_biases.push_back(next());
  }
  for (std::size_t i = 0; i < n_dec; ++i) {
    c.params.decoder_weights.push_back(next());
    c.params.decoder_biases.push_back(next());
  }

  c.optimizer.step_count = r.get<std::uint64_t>();
  c.optimizer.config.learning_rate = r.get<double>();
  c.optimizer.config.beta1 = r.get<double>();
  c.optimizer.config.beta2 = r.get<double>();
  c.optimizer.config.epsilon = r.get<double>();
  const auto moments = r.get<std::uint64_t>();
  if (moments != 0 && moments != n) throw CorruptFileError("checkpoint: optimizer state mismatch");
  for (std::uint64_t i = 0; i < moments; ++i) {
    c.optimizer.first_moment.push_back(get_tensor(r).second);
    c.optimizer.second_moment.push_back(get_tensor(r).second);
  }
  c.train_seed = r.get<std::uint64_t>();
  c.epoch = r.get<std::uint64_t>();
  if (!r.at_end()) throw CorruptFileError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_fingerprint) {
  Checkpoint c = deserialize_checkpoint(read_file(path));
  if (expected_fingerprint && *expected_fingerprint != c.schema_fingerprint) {
    throw SchemaMismatchError("checkpoint schema fingerprint " + c.schema_fingerprint +
                              " does not match " + *expected_fingerprint);
  }
  return c;
}

}  // namespace cwae
