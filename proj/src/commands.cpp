#include "cwae/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::string> context_vector(std::string_view name) {
  if (name == kNoContext) return {};
  return {std::string(name)};
}

std::string context_label(const std::vector<std::string>& context) {
  return context.empty() ? std::string(kNoContext) : context.front();
}

void write_rel(const std::filesystem::path& out_dir, const std::string& rel,
               std::string_view contents, std::vector<std::string>& files) {
  write_file(out_dir / rel, contents);
  files.push_back(rel);
}

ojson selection_json(const SelectionReport& report) {
  return ojson::parse(selection_report_json(report));
}

}  // namespace

IngestResult cmd_ingest(const Manifest& manifest, const std::filesystem::path& out_file) {
  const RawTable raw = read_csv(manifest.csv);
  const DatasetSchema schema = infer_schema(raw, manifest.infer_options());
  IngestResult r;
  r.table = split_dataset(encode_table(raw, schema, VocabSource::fit), manifest.split_options());
  r.stats = dataset_stats(r.table);
  save_encoded(out_file, r.table, manifest.name);
  return r;
}

std::string format_stats(std::string_view name, const DatasetStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%.*s: rows %zu, features %zu, anomalies %zu (%.2f%%), avg cardinality %.2f",
                static_cast<int>(name.size()), name.data(), s.rows, s.features, s.anomalies,
                100.0 * s.anomaly_ratio, s.average_cardinality);
  return buf;
}

ContextChoice ContextChoice::parse(std::string_view text) {
  if (text.empty()) throw ValidationError("--context: empty value");
  if (text == "auto") return {Mode::automatic, {}};
  if (text == "none" || text == kNoContext) return {Mode::none, {}};
  if (text == "best") return {Mode::best, {}};
  return {Mode::named, std::string(text)};
}

ModelConfig final_model_config(const EncodedTable& table, const RunConfig& config,
                               const std::vector<std::string>& context, std::uint64_t seed) {
  ModelConfig m = ModelConfig::for_context(table.schema, context, config.model);
  m.seed = derive_seed(seed, "final/init");
  return m;
}

TrainConfig final_train_config(const RunConfig& config, std::uint64_t seed) {
  TrainConfig t = config.train;
  t.seed = derive_seed(seed, "final/train");
  return t;
}

SelectionOptions selection_options(const RunConfig& config, std::uint64_t seed) {
  SelectionOptions o;
  o.model = config.model;
  o.train = config.train;
  if (config.selection.batch_size > 0) o.train.batch_size = config.selection.batch_size;
  if (config.selection.learning_rate > 0) o.train.learning_rate = config.selection.learning_rate;
  o.seed = seed;
  o.include_no_context = config.selection.include_no_context;
  o.jobs = config.jobs;
  o.curve_epochs = config.selection.curve_epochs;
  return o;
}

ModelEvaluation evaluate_model(const EncodedTable& table, const std::vector<std::string>& context,
                               const RunConfig& config, std::uint64_t seed) {
  const std::vector<std::size_t> test_rows = table.rows_in(Split::test);
  std::size_t positives = 0;
  for (std::size_t r : test_rows) positives += table.labels[r];
  if (positives == 0 || positives == test_rows.size()) {
    throw DegenerateLabelsError("test split needs both normal and anomalous rows (" +
                                std::to_string(positives) + " of " +
                                std::to_string(test_rows.size()) + " anomalous)");
  }

  CwaeModel model(final_model_config(table, config, context, seed), table.schema);
  ModelEvaluation e;
  e.train = train(model, final_train_config(config, seed), table);

  const std::vector<std::size_t> train_rows = table.rows_in(Split::train);
  const std::vector<double> train_scores = model.anomaly_score(table, train_rows);
  const std::vector<double> test_scores = model.anomaly_score(table, test_rows);
  std::vector<std::int32_t> train_ctx, test_ctx;
  if (!context.empty()) {
    const std::size_t col = table.schema.index_of(context.front());
    train_ctx = table.column(col, train_rows);
    test_ctx = table.column(col, test_rows);
  }
  std::vector<std::uint8_t> labels;
  for (std::size_t r : test_rows) labels.push_back(table.labels[r]);

  e.thresholds = fit_thresholds(train_scores, train_ctx, context.empty() ? "" : context.front());
  const auto records = contextual_ratios(test_rows, test_scores, test_ctx, labels, e.thresholds);
  e.roc = aucroc_grid(records);
  e.aucroc = e.roc.aucroc;
  e.exact_auc = exact_auc(records);
  return e;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  for (double v : values) m.mean += v;
  m.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / (n - 1.0));
  }
  return m;
}

SelectionReport cmd_select_context(const EncodedTable& table, const RunConfig& config,
                                   const std::filesystem::path& out_dir,
                                   std::vector<std::string>* files) {
  config.validate();
  const SelectionReport report =
      select_context(table, table.schema.candidate_context_columns,
                     selection_options(config, config.seeds.front()));
  std::vector<std::string> local;
  std::vector<std::string>& written = files ? *files : local;
  write_rel(out_dir, "selection.json", selection_report_json(report), written);
  const auto rows = selection_plot_rows(report);
  write_rel(out_dir, "plots/selection_curves.csv", format_plot_csv(rows), written);
  return report;
}

RunSummary cmd_evaluate(const EncodedTable& table, std::string_view dataset,
                        const EvaluateOptions& options, const RunConfig& config,
                        const std::filesystem::path& out_dir) {
  config.validate();
  RunSummary s;
  s.dataset = std::string(dataset);

  std::vector<std::string> context;
  switch (options.context.mode) {
    case ContextChoice::Mode::named:
      table.schema.index_of(options.context.name);
      context = {options.context.name};
      break;
    case ContextChoice::Mode::none:
      break;
    case ContextChoice::Mode::best:
      if (!options.best_context) {
        throw ValidationError("--context best needs best_context in the manifest");
      }
      context = context_vector(*options.best_context);
      if (!context.empty()) table.schema.index_of(context.front());
      break;
    case ContextChoice::Mode::automatic:
      s.selection = cmd_select_context(table, config, out_dir, &s.files);
      context = context_vector(s.selection->chosen);
      break;
  }
  s.context = context_label(context);

  const std::size_t n = config.seeds.size();
  std::vector<ModelEvaluation> cwae(n), wae(n);
  const bool same = context.empty();
  parallel_for(same ? n : 2 * n, config.jobs, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i % n];
    if (i < n) {
      cwae[i] = evaluate_model(table, context, config, seed);
    } else {
      wae[i - n] = evaluate_model(table, {}, config, seed);
    }
  });
  if (same) wae = cwae;

  std::vector<double> cwae_auc, wae_auc;
  std::vector<PlotRow> delta_rows;
  for (std::size_t i = 0; i < n; ++i) {
    s.seeds.push_back({config.seeds[i], cwae[i].aucroc, wae[i].aucroc, cwae[i].exact_auc,
                       wae[i].exact_auc});
    cwae_auc.push_back(cwae[i].aucroc);
    wae_auc.push_back(wae[i].aucroc);
    delta_rows.push_back({"auc_delta", std::to_string(config.seeds[i]),
                          cwae[i].aucroc - wae[i].aucroc});
  }
  s.cwae = mean_std(cwae_auc);
  s.wae = mean_std(wae_auc);

  if (!context.empty()) {
    const auto rows = table.rows_in(Split::train);
    s.within_variance_ratio = variance_decomposition(table, context.front(), rows).summed.within_ratio();
  }

  if (options.sweep_best) {
    std::vector<std::string> candidates = table.schema.candidate_context_columns;
    std::vector<std::vector<double>> aucs(candidates.size(), std::vector<double>(n));
    parallel_for(candidates.size() * n, config.jobs, [&](std::size_t i) {
      const std::size_t c = i / n;
      aucs[c][i % n] = evaluate_model(table, {candidates[c]}, config, config.seeds[i % n]).aucroc;
    });
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      s.sweep.push_back({candidates[c], aucs[c], mean_std(aucs[c])});
    }
    std::stable_sort(s.sweep.begin(), s.sweep.end(), [](const auto& a, const auto& b) {
      return a.summary.mean > b.summary.mean;
    });
  }

  const auto thresholds = threshold_plot_rows(cwae.front().thresholds, table.schema);
  write_rel(out_dir, "plots/thresholds.csv", format_plot_csv(thresholds), s.files);
  std::vector<PlotRow> roc = roc_plot_rows(cwae.front().roc, "cwae");
  const auto wae_roc = roc_plot_rows(wae.front().roc, "wae");
  roc.insert(roc.end(), wae_roc.begin(), wae_roc.end());
  write_rel(out_dir, "plots/roc.csv", format_plot_csv(roc), s.files);
  write_rel(out_dir, "plots/auc_delta.csv", format_plot_csv(delta_rows), s.files);
  std::vector<PlotRow> loss;
  for (const auto& [series, eval] : {std::pair{"cwae", &cwae.front()}, std::pair{"wae", &wae.front()}}) {
    for (std::size_t e = 0; e < eval->train.epochs.size(); ++e) {
      const auto& ep = eval->train.epochs[e];
      loss.push_back({std::string(series) + "_train", std::to_string(e + 1), ep.train_total});
      if (ep.val_recon) loss.push_back({std::string(series) + "_val", std::to_string(e + 1), *ep.val_recon});
    }
  }
  write_rel(out_dir, "plots/loss_curves.csv", format_plot_csv(loss), s.files);
  s.files.push_back("evaluation.json");
  write_file(out_dir / "evaluation.json", run_summary_json(s));
  return s;
}

std::string run_summary_json(const RunSummary& s) {
  ojson j;
  j["dataset"] = s.dataset;
  j["context"] = s.context;
  j["cwae"] = {{"mean", s.cwae.mean}, {"stddev", s.cwae.stddev}};
  j["wae"] = {{"mean", s.wae.mean}, {"stddev", s.wae.stddev}};
  auto& seeds = j["seeds"] = ojson::array();
  for (const auto& r : s.seeds) {
    seeds.push_back({{"seed", r.seed},
                     {"cwae_aucroc", r.cwae_auc},
                     {"wae_aucroc", r.wae_auc},
                     {"cwae_exact_auc", r.cwae_exact_auc},
                     {"wae_exact_auc", r.wae_exact_auc}});
  }
  j["complexity_avg_scaled"] =
      s.complexity_avg_scaled ? ojson(*s.complexity_avg_scaled) : ojson(nullptr);
  j["within_variance_ratio"] =
      s.within_variance_ratio ? ojson(*s.within_variance_ratio) : ojson(nullptr);
  if (s.selection) j["selection"] = selection_json(*s.selection);
  if (!s.sweep.empty()) {
    auto& sweep = j["context_sweep"] = ojson::array();
    for (const auto& e : s.sweep) {
      sweep.push_back({{"context", e.context},
                       {"aucroc", e.auc},
                       {"mean", e.summary.mean},
                       {"stddev", e.summary.stddev}});
    }
  }
  j["files"] = s.files;
  return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> cmd_train(const EncodedTable& table,
                                             const std::vector<std::string>& context,
                                             const RunConfig& config,
                                             const std::filesystem::path& out_dir) {
  config.validate();
  const std::size_t n = config.seeds.size();
  std::vector<std::filesystem::path> written(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    CwaeModel model(final_model_config(table, config, context, seed), table.schema);
    AdamState state;
    const TrainConfig tcfg = final_train_config(config, seed);
    const TrainReport report = train(model, tcfg, table, &state);

    const std::string stem = "seed_" + std::to_string(seed);
    written[i] = out_dir / (stem + ".ckpt");
    save_checkpoint(written[i], make_checkpoint(model, table.schema, state, tcfg.seed, tcfg.epochs));

    ojson j;
    j["context"] = context_label(context);
    j["seed"] = seed;
    j["initial_batch_loss"] = report.initial_batch_loss;
    auto& epochs = j["epochs"] = ojson::array();
    for (const auto& e : report.epochs) {
      ojson row = {{"train_total", e.train_total}, {"train_recon", e.train_recon}, {"train_mmd", e.train_mmd}};
      row["val_recon"] = e.val_recon ? ojson(*e.val_recon) : ojson(nullptr);
      epochs.push_back(std::move(row));
    }
    write_file(out_dir / (stem + "_train.json"), j.dump(2) + "\n");
  });
  return written;
}

std::vector<ComplexityReport> cmd_complexity(std::span<const NamedTable> datasets,
                                             const std::filesystem::path& out_file,
                                             std::uint64_t seed) {
  if (datasets.size() < 2) throw ValidationError("complexity needs at least 2 datasets");
  std::vector<RawComplexity> raw(datasets.size());
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    raw[i] = compute_complexity(datasets[i].table, datasets[i].name, seed);
  }
  const auto reports = scale_and_rank(raw);
  write_file(out_file, format_complexity_csv(reports));
  for (const auto& r : raw) {
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (!r.errors[m].empty()) {
        std::fprintf(stderr, "%s: %s unavailable: %s\n", r.dataset.c_str(),
                     std::string(kMetricNames[m]).c_str(), r.errors[m].c_str());
      }
    }
  }
  return reports;
}

std::vector<ComplexityReport> cmd_complexity_from_raw(const std::filesystem::path& raw_scores_csv,
                                                      const std::filesystem::path& out_file) {
  const auto raw = parse_raw_scores_csv(read_file(raw_scores_csv));
  const auto reports = scale_and_rank(raw);
  write_file(out_file, format_complexity_csv(reports));
  return reports;
}

std::string cmd_report(std::span<const std::filesystem::path> summaries,
                       const std::optional<std::filesystem::path>& complexity_csv,
                       const std::filesystem::path& out_file) {
  std::map<std::string, std::string> avg_scaled;
  if (complexity_csv) {
    const RawTable t = parse_csv(read_file(*complexity_csv));
    const auto col = std::find(t.header.begin(), t.header.end(), "avg_scaled");
    if (t.header.empty() || col == t.header.end()) {
      throw ValidationError("report: complexity csv lacks an avg_scaled column");
    }
    const auto at = static_cast<std::size_t>(col - t.header.begin());
    for (const auto& row : t.rows) {
      if (row.size() == t.header.size()) avg_scaled[row[0]] = row[at];
    }
  }
  std::string out = "dataset,context,cwae_mean,cwae_stddev,wae_mean,wae_stddev,delta,avg_scaled\n";
  for (const auto& path : summaries) {
    ojson j;
    try {
      j = ojson::parse(read_file(path));
      const std::string name = j.at("dataset").get<std::string>();
      const double cm = j.at("cwae").at("mean").get<double>();
      const double wm = j.at("wae").at("mean").get<double>();
      out += csv_escape(name) + ',' + csv_escape(j.at("context").get<std::string>()) + ',' +
             format_double(cm) + ',' + format_double(j.at("cwae").at("stddev").get<double>()) + ',' +
             format_double(wm) + ',' + format_double(j.at("wae").at("stddev").get<double>()) + ',' +
             format_double(cm - wm) + ',' + (avg_scaled.count(name) ? avg_scaled[name] : "") + '\n';
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("report: " + path.filename().string() + ": " + e.what());
    }
  }
  write_file(out_file, out);
  return out;
}

}  // namespace cwae
