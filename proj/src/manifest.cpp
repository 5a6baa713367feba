#include "cwae/manifest.hpp"

#include <set>

#include <json.hpp>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"

namespace cwae {
namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, std::string_view what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

InferOptions Manifest::infer_options() const {
  InferOptions o;
  o.numeric_bins = numeric_bins;
  o.label_column = label_column;
  o.positive_label = positive_label;
  o.candidate_context_columns = candidate_context_columns;
  o.drop_columns = drop_columns;
  return o;
}

SplitOptions Manifest::split_options() const { return {val_fraction, test_fraction, split_seed}; }

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json j = parse_json(json_text, "manifest");
  reject_unknown_keys(j,
                      {"name", "csv", "label_column", "positive_label", "candidate_context_columns",
                       "drop_columns", "numeric_bins", "val_fraction", "test_fraction", "seed",
                       "best_context", "notes"},
                      "manifest");
  Manifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.csv = resolve(base_dir, j.at("csv").get<std::string>());
    m.label_column = j.at("label_column").get<std::string>();
    read_opt(j, "positive_label", m.positive_label);
    read_opt(j, "candidate_context_columns", m.candidate_context_columns);
    read_opt(j, "drop_columns", m.drop_columns);
    read_opt(j, "numeric_bins", m.numeric_bins);
    read_opt(j, "val_fraction", m.val_fraction);
    read_opt(j, "test_fraction", m.test_fraction);
    read_opt(j, "seed", m.split_seed);
    if (j.contains("best_context")) m.best_context = j.at("best_context").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  if (m.name.empty()) throw ValidationError("manifest: empty name");
  if (m.label_column.empty()) throw ValidationError("manifest: empty label_column");
  if (m.numeric_bins < 2) throw ValidationError("manifest: numeric_bins must be at least 2");
  if (!(m.val_fraction > 0 && m.val_fraction < 1 && m.test_fraction > 0 && m.test_fraction < 1 &&
        m.val_fraction + m.test_fraction < 1)) {
    throw ValidationError("manifest: split fractions must lie in (0,1) and sum below 1");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ValidationError("run config: at least one seed is required");
  if (train.epochs == 0) throw ValidationError("run config: train.epochs must be positive");
  if (train.batch_size == 0) throw ValidationError("run config: train.batch_size must be positive");
  if (!(train.learning_rate > 0)) throw ValidationError("run config: train.learning_rate must be positive");
  if (model.embed_dim == 0 || model.latent_dim == 0) {
    throw ValidationError("run config: embed_dim and latent_dim must be positive");
  }
  if (!(model.lambda_mmd >= 0)) throw ValidationError("run config: lambda_mmd must be non-negative");
  if (model.mmd_sigma < 0) throw ValidationError("run config: mmd_sigma must be non-negative");
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json j = parse_json(json_text, "run config");
  reject_unknown_keys(j, {"manifest", "model", "train", "selection", "seeds", "out_dir", "jobs"},
                      "run config");
  RunConfig c;
  try {
    if (j.contains("manifest")) c.manifest = resolve(base_dir, j.at("manifest").get<std::string>());
    if (j.contains("out_dir")) c.out_dir = resolve(base_dir, j.at("out_dir").get<std::string>());
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "jobs", c.jobs);
    if (j.contains("model")) {
      const json& m = j.at("model");
      reject_unknown_keys(m,
                          {"embed_dim", "encoder_hidden", "latent_dim", "decoder_hidden",
                           "lambda_mmd", "mmd_sigma", "mmd_on_final_latent"},
                          "run config model");
      read_opt(m, "embed_dim", c.model.embed_dim);
      read_opt(m, "encoder_hidden", c.model.encoder_hidden);
      read_opt(m, "latent_dim", c.model.latent_dim);
      read_opt(m, "decoder_hidden", c.model.decoder_hidden);
      read_opt(m, "lambda_mmd", c.model.lambda_mmd);
      read_opt(m, "mmd_sigma", c.model.mmd_sigma);
      read_opt(m, "mmd_on_final_latent", c.model.mmd_on_final_latent);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown_keys(t, {"epochs", "batch_size", "learning_rate", "shuffle"}, "run config train");
      read_opt(t, "epochs", c.train.epochs);
      read_opt(t, "batch_size", c.train.batch_size);
      read_opt(t, "learning_rate", c.train.learning_rate);
      read_opt(t, "shuffle", c.train.shuffle);
    }
    if (j.contains("selection")) {
      const json& s = j.at("selection");
      reject_unknown_keys(s, {"batch_size", "learning_rate", "curve_epochs", "include_no_context"},
                          "run config selection");
      read_opt(s, "batch_size", c.selection.batch_size);
      read_opt(s, "learning_rate", c.selection.learning_rate);
      read_opt(s, "curve_epochs", c.selection.curve_epochs);
      read_opt(s, "include_no_context", c.selection.include_no_context);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

}  // namespace cwae
