#include "cwae/selector.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cwae/error.hpp"
#include "cwae/rng.hpp"

namespace cwae {
namespace {

bool ranks_before(const CandidateResult& a, const CandidateResult& b) {
  if (a.failed != b.failed) return !a.failed;
  if (!a.failed && a.joint_loss != b.joint_loss) return a.joint_loss < b.joint_loss;
  const bool a_none = a.candidate == kNoContext;
  const bool b_none = b.candidate == kNoContext;
  if (a_none != b_none) return b_none;
  return a.candidate < b.candidate;
}

}  // namespace

double joint_val_loss(double conditional_nll, const ContextDistribution* distribution,
                      std::span<const std::int32_t> val_context_values) {
  if (distribution == nullptr || val_context_values.empty()) return conditional_nll;
  double sum = 0.0;
  for (std::int32_t v : val_context_values) sum -= std::log(distribution->probability(v));
  return conditional_nll + sum / static_cast<double>(val_context_values.size());
}

std::uint64_t candidate_seed(std::uint64_t base, std::string_view candidate) {
  return derive_seed(base, candidate);
}

CandidateResult score_candidate(const EncodedTable& data, std::string_view candidate,
                                const SelectionOptions& options) {
  CandidateResult result;
  result.candidate = std::string(candidate);
  const bool none = candidate == kNoContext;
  const std::uint64_t seed = candidate_seed(options.seed, candidate);

  std::vector<std::string> context;
  if (!none) context.emplace_back(candidate);
  ModelConfig mcfg = ModelConfig::for_context(data.schema, context, options.model);
  mcfg.seed = derive_seed(seed, "init");

  std::optional<ContextDistribution> dist;
  std::vector<std::int32_t> val_ctx;
  if (!none) {
    dist = context_distribution(data, candidate);
    val_ctx = data.column(data.schema.index_of(candidate), data.rows_in(Split::val));
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    CwaeModel model(mcfg, data.schema);
    TrainConfig tcfg = options.train;
    tcfg.epochs = 1;
    tcfg.seed = derive_seed(seed, "train");
    AdamState state;
    train(model, tcfg, data, &state);
    result.conditional_nll = validation_nll(model, data);
    result.context_nll = joint_val_loss(0.0, dist ? &*dist : nullptr, val_ctx);
    result.joint_loss = result.conditional_nll + result.context_nll;
    result.curve.push_back(result.joint_loss);
    for (std::size_t e = 1; e < options.curve_epochs; ++e) {
      tcfg.seed = derive_seed(seed, "curve/" + std::to_string(e));
      train(model, tcfg, data, &state);
      result.curve.push_back(
          joint_val_loss(validation_nll(model, data), dist ? &*dist : nullptr, val_ctx));
    }
  } catch (const DivergenceError& e) {
    result.failed = true;
    result.failure = e.what();
    result.curve.clear();
  }
  result.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  std::vector<std::exception_ptr> errors(n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : workers) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SelectionReport select_context(const EncodedTable& data, std::span<const std::string> candidates,
                               const SelectionOptions& options) {
  if (candidates.empty()) {
    throw ValidationError("select_context: no candidates");
  }
  if (data.count(Split::val) == 0) throw ValidationError("select_context: empty validation split");
  std::vector<std::string> names;
  bool want_none = options.include_no_context;
  for (const auto& c : candidates) {
    if (c == kNoContext) {
      want_none = true;
      continue;
    }
    data.schema.index_of(c);
    if (std::find(names.begin(), names.end(), c) == names.end()) names.push_back(c);
  }
  if (data.n_cols < 2 && !names.empty()) {
    throw ValidationError("select_context: a context needs at least one other column");
  }
  if (want_none || names.empty()) names.emplace_back(kNoContext);

  SelectionReport report;
  report.seed = options.seed;
  report.candidates.resize(names.size());
  parallel_for(names.size(), options.jobs,
               [&](std::size_t i) { report.candidates[i] = score_candidate(data, names[i], options); });
  std::sort(report.candidates.begin(), report.candidates.end(), ranks_before);
  if (report.candidates.front().failed) {
    throw DivergenceError("select_context: every candidate diverged (first: " +
                          report.candidates.front().failure + ")");
  }
  report.chosen = report.candidates.front().candidate;
  return report;
}

std::string selection_report_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["chosen"] = report.chosen;
  j["seed"] = report.seed;
  auto& list = j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : report.candidates) {
    nlohmann::ordered_json e;
    e["candidate"] = c.candidate;
    e["failed"] = c.failed;
    if (c.failed) {
      e["failure"] = c.failure;
    } else {
      e["conditional_nll"] = c.conditional_nll;
      e["context_nll"] = c.context_nll;
      e["joint_loss"] = c.joint_loss;
    }
    if (c.curve.size() > 1) e["curve"] = c.curve;
    list.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::vector<PlotRow> selection_plot_rows(const SelectionReport& report) {
  std::vector<PlotRow> rows;
  for (const auto& c : report.candidates) {
    for (std::size_t e = 0; e < c.curve.size(); ++e) {
      rows.push_back({c.candidate, std::to_string(e + 1), c.curve[e]});
    }
  }
  return rows;
}

}  // namespace cwae
