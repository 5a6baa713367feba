#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cwae/commands.hpp"
#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"

namespace {

using namespace cwae;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kOther = 1, kValidation = 2, kIo = 3, kDivergence = 4, kDegenerate = 5 };

struct Common {
  std::string manifest;
  std::string data;
  std::string config;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 0;
  bool jobs_set = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_seeds) {
  cmd->add_option("--manifest", c.manifest, "dataset manifest (JSON)");
  cmd->add_option("--data", c.data, "encoded dataset written by `ingest`");
  cmd->add_option("--config", c.config, "run configuration (JSON)");
  cmd->add_option("--out-dir", c.out_dir, "output directory (default $CWAE_OUT_DIR, then ./out)");
  if (with_seeds) {
    cmd->add_option("--seed,--seeds", c.seeds, "model seeds, overriding the config");
    cmd->add_option("--jobs", c.jobs, "worker threads (0 = all cores)");
  }
}

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (c.jobs_set) cfg.jobs = c.jobs;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c, const RunConfig* cfg) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (cfg && cfg->out_dir) return *cfg->out_dir;
  if (const char* env = std::getenv("CWAE_OUT_DIR"); env && *env) return env;
  return "out";
}

std::optional<Manifest> manifest_for(const Common& c, const RunConfig* cfg) {
  if (!c.manifest.empty()) return load_manifest(c.manifest);
  if (cfg && cfg->manifest) return load_manifest(*cfg->manifest);
  return std::nullopt;
}

struct Loaded {
  EncodedTable table;
  std::string name;
  std::optional<Manifest> manifest;
};

// --data wins over the manifest; a manifest alone is ingested in memory.
Loaded load_dataset(const Common& c, const RunConfig* cfg) {
  Loaded l;
  l.manifest = manifest_for(c, cfg);
  if (!c.data.empty()) {
    l.table = load_encoded(c.data, &l.name);
    return l;
  }
  if (!l.manifest) throw ValidationError("need --data or --manifest");
  const RawTable raw = read_csv(l.manifest->csv);
  const DatasetSchema schema = infer_schema(raw, l.manifest->infer_options());
  l.table = split_dataset(encode_table(raw, schema, VocabSource::fit), l.manifest->split_options());
  l.name = l.manifest->name;
  return l;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

int run_ingest(const Common& c) {
  if (c.manifest.empty()) throw ValidationError("ingest needs --manifest");
  const Manifest m = load_manifest(c.manifest);
  const fs::path out = out_dir(c, nullptr) / (m.name + ".cwds");
  const IngestResult r = cmd_ingest(m, out);
  std::cout << format_stats(m.name, r.stats) << "\n";
  std::cout << "split: train " << r.table.count(Split::train) << ", val " << r.table.count(Split::val)
            << ", test " << r.table.count(Split::test) << "\n";
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int run_train(const Common& c, const std::string& context) {
  const RunConfig cfg = load_config(c);
  const Loaded d = load_dataset(c, &cfg);
  std::vector<std::string> ctx;
  const ContextChoice choice = ContextChoice::parse(context);
  if (choice.mode == ContextChoice::Mode::named) {
    d.table.schema.index_of(choice.name);
    ctx = {choice.name};
  } else if (choice.mode == ContextChoice::Mode::best) {
    if (!d.manifest || !d.manifest->best_context) throw ValidationError("--context best needs a manifest with best_context");
    if (*d.manifest->best_context != kNoContext) ctx = {*d.manifest->best_context};
  } else if (choice.mode == ContextChoice::Mode::automatic) {
    throw ValidationError("train takes a column name, none or best; run select-context first");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto paths = cmd_train(d.table, ctx, cfg, out_dir(c, &cfg));
  for (const auto& p : paths) std::cout << "wrote " << p.string() << "\n";
  std::cout << "train time " << fixed(seconds_since(t0), 1) << " s\n";
  return kOk;
}

int run_select(const Common& c, const std::vector<std::string>& only) {
  const RunConfig cfg = load_config(c);
  Loaded d = load_dataset(c, &cfg);
  if (!only.empty()) d.table.schema.candidate_context_columns = only;
  const auto t0 = std::chrono::steady_clock::now();
  const SelectionReport r = cmd_select_context(d.table, cfg, out_dir(c, &cfg));
  for (const auto& cand : r.candidates) {
    std::cout << cand.candidate << ": joint " << fixed(cand.joint_loss) << " (cond "
              << fixed(cand.conditional_nll) << ", ctx " << fixed(cand.context_nll) << ")"
              << (cand.failed ? " FAILED " + cand.failure : "") << "\n";
  }
  std::cout << "chosen: " << r.chosen << "\n";
  std::cout << "selection time " << fixed(seconds_since(t0), 1) << " s\n";
  return kOk;
}

int run_evaluate(const Common& c, const std::string& context, bool sweep_best) {
  const RunConfig cfg = load_config(c);
  const Loaded d = load_dataset(c, &cfg);
  EvaluateOptions opts;
  opts.context = ContextChoice::parse(context);
  opts.sweep_best = sweep_best;
  if (d.manifest) opts.best_context = d.manifest->best_context;
  const auto t0 = std::chrono::steady_clock::now();
  const RunSummary s = cmd_evaluate(d.table, d.name, opts, cfg, out_dir(c, &cfg));
  std::cout << s.dataset << " context " << s.context << "\n";
  for (const auto& r : s.seeds) {
    std::cout << "  seed " << r.seed << ": CWAE " << fixed(r.cwae_auc) << ", WAE " << fixed(r.wae_auc) << "\n";
  }
  std::cout << "CWAE " << fixed(s.cwae.mean) << " +- " << fixed(s.cwae.stddev) << ", WAE "
            << fixed(s.wae.mean) << " +- " << fixed(s.wae.stddev) << "\n";
  for (const auto& e : s.sweep) {
    std::cout << "  sweep " << e.context << ": " << fixed(e.summary.mean) << " +- " << fixed(e.summary.stddev) << "\n";
  }
  std::cout << "evaluate time " << fixed(seconds_since(t0), 1) << " s\n";
  return kOk;
}

int run_complexity(const Common& c, const std::vector<std::string>& manifests,
                   const std::vector<std::string>& data, const std::string& raw_scores,
                   std::uint64_t seed) {
  const fs::path out = out_dir(c, nullptr) / "complexity.csv";
  std::vector<ComplexityReport> reports;
  if (!raw_scores.empty()) {
    reports = cmd_complexity_from_raw(raw_scores, out);
  } else {
    std::vector<NamedTable> tables;
    for (const auto& p : data) {
      NamedTable t;
      t.table = load_encoded(p, &t.name);
      tables.push_back(std::move(t));
    }
    for (const auto& p : manifests) {
      Common one;
      one.manifest = p;
      Loaded l = load_dataset(one, nullptr);
      tables.push_back({l.name, std::move(l.table)});
    }
    reports = cmd_complexity(tables, out, seed);
  }
  for (const auto& r : reports) {
    std::cout << r.dataset << ": avg_scaled " << fixed(r.avg_scaled) << ", rank " << r.overall_rank << "\n";
  }
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

int run_report(const Common& c, const std::vector<std::string>& summaries, const std::string& complexity) {
  if (summaries.empty()) throw ValidationError("report needs at least one --summary");
  std::vector<fs::path> paths(summaries.begin(), summaries.end());
  std::optional<fs::path> cx;
  if (!complexity.empty()) cx = complexity;
  const fs::path out = out_dir(c, nullptr) / "report.csv";
  std::cout << cmd_report(paths, cx, out);
  std::cout << "wrote " << out.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-conditioned autoencoder anomaly detection for categorical tables"};
  app.require_subcommand(1);

  Common common;
  std::string context = "auto";
  bool sweep_best = false;
  std::vector<std::string> only, manifests, data, summaries;
  std::string raw_scores, complexity_csv;
  std::uint64_t complexity_seed = 0;

  auto* ingest = app.add_subcommand("ingest", "encode and split a dataset, print its stats");
  add_common(ingest, common, false);

  auto* train = app.add_subcommand("train", "train one model per seed and write checkpoints");
  add_common(train, common, true);
  train->add_option("--context", context, "column name, none or best")->required();

  auto* select = app.add_subcommand("select-context", "one-epoch sweep over candidate contexts");
  add_common(select, common, true);
  select->add_option("--candidate", only, "restrict the sweep to these columns");

  auto* evaluate = app.add_subcommand("evaluate", "train CWAE and WAE per seed, report test AUCROC");
  add_common(evaluate, common, true);
  evaluate->add_option("--context", context, "column name, auto, none or best")->capture_default_str();
  evaluate->add_flag("--sweep-best", sweep_best, "also evaluate every candidate context");

  auto* complexity = app.add_subcommand("complexity", "dataset complexity metrics, scaled and ranked");
  complexity->add_option("--manifest", manifests, "dataset manifests");
  complexity->add_option("--data", data, "encoded datasets");
  complexity->add_option("--raw-scores", raw_scores, "CSV of raw metric scores to scale and rank instead");
  complexity->add_option("--seed", complexity_seed, "seed for sampled anomaly pairs");
  complexity->add_option("--out-dir", common.out_dir, "output directory");

  auto* report = app.add_subcommand("report", "collect evaluation.json files into one CSV");
  report->add_option("--summary", summaries, "evaluation.json files")->required();
  report->add_option("--complexity", complexity_csv, "complexity CSV to join on dataset");
  report->add_option("--out-dir", common.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }
  for (auto* sub : {train, select, evaluate}) {
    if (sub->parsed() && sub->count("--jobs")) common.jobs_set = true;
  }

  try {
    if (ingest->parsed()) return run_ingest(common);
    if (train->parsed()) return run_train(common, context);
    if (select->parsed()) return run_select(common, only);
    if (evaluate->parsed()) return run_evaluate(common, context, sweep_best);
    if (complexity->parsed()) return run_complexity(common, manifests, data, raw_scores, complexity_seed);
    if (report->parsed()) return run_report(common, summaries, complexity_csv);
  } catch (const DegenerateLabelsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
