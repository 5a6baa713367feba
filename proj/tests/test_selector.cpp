#include <doctest.h>

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "cwae/error.hpp"
#include "cwae/selector.hpp"
#include "test_util.hpp"

using namespace cwae;

namespace {

EncodedTable data(std::size_t n = 400, std::uint64_t seed = 5) {
  return testing::encode(testing::contextual_raw(seed, n, 0), {0.1, 0.2, seed});
}

SelectionOptions options(std::uint64_t seed = 1) {
  SelectionOptions o;
  o.train.batch_size = 64;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("joint_val_loss: worked examples") {
  ContextDistribution uniform{"c", {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  const std::vector<std::int32_t> seen{1, 2, 2, 1, 1};
  CHECK(joint_val_loss(0.0, &uniform, seen) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(joint_val_loss(2.5, &uniform, seen) == doctest::Approx(2.5 + std::log(3.0)).epsilon(1e-12));

  ContextDistribution skew{"c", {1.0 / 7, 4.0 / 7, 2.0 / 7}};
  const std::vector<std::int32_t> one{1};
  CHECK(joint_val_loss(0.0, &skew, one) == doctest::Approx(0.5596157879).epsilon(1e-9));

  CHECK(joint_val_loss(1.25, nullptr, seen) == 1.25);
}

TEST_CASE("select_context: a single candidate without NO_CONTEXT is returned") {
  const auto t = data();
  auto o = options();
  o.include_no_context = false;
  const std::vector<std::string> c{"y1"};
  const auto r = select_context(t, c, o);
  CHECK(r.chosen == "y1");
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].context_nll >= 0.0);
}

TEST_CASE("select_context: report covers every candidate plus NO_CONTEXT, ordered, reproducible") {
  const auto t = data();
  const std::vector<std::string> c{"ctx", "y0", "y1", "y2"};
  auto o = options(3);
  o.jobs = 4;
  const auto a = select_context(t, c, o);
  REQUIRE(a.candidates.size() == 5);
  for (std::size_t i = 1; i < a.candidates.size(); ++i)
    CHECK(a.candidates[i - 1].joint_loss <= a.candidates[i].joint_loss);
  CHECK(a.chosen == a.candidates.front().candidate);
  for (const auto& r : a.candidates) {
    CHECK_FALSE(r.failed);
    CHECK(r.context_nll >= 0.0);
    CHECK(r.joint_loss == doctest::Approx(r.conditional_nll + r.context_nll).epsilon(1e-12));
    if (r.candidate == kNoContext) CHECK(r.context_nll == 0.0);
  }

  // thread count must not matter
  o.jobs = 1;
  const auto b = select_context(t, c, o);
  REQUIRE(b.candidates.size() == a.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].candidate == b.candidates[i].candidate);
    CHECK(a.candidates[i].joint_loss == b.candidates[i].joint_loss);
  }
  CHECK(selection_report_json(a) == selection_report_json(b));
}

TEST_CASE("select_context: candidate seeds depend on base seed and name") {
  CHECK(candidate_seed(1, "a") == candidate_seed(1, "a"));
  CHECK(candidate_seed(1, "a") != candidate_seed(1, "b"));
  CHECK(candidate_seed(1, "a") != candidate_seed(2, "a"));
}

TEST_CASE("select_context: errors") {
  const auto t = data();
  const std::vector<std::string> none;
  CHECK_THROWS_AS(select_context(t, none, options()), ValidationError);
  const std::vector<std::string> bad{"nope"};
  CHECK_THROWS_AS(select_context(t, bad, options()), ValidationError);
  const std::vector<std::string> label{"label"};
  CHECK_THROWS_AS(select_context(t, label, options()), ValidationError);
  auto no_val = t;
  for (auto& s : no_val.split)
    if (s == Split::val) s = Split::train;
  const std::vector<std::string> ok{"ctx"};
  CHECK_THROWS_AS(select_context(no_val, ok, options()), ValidationError);
}

TEST_CASE("selection report JSON and plot rows") {
  const auto t = data(300);
  auto o = options();
  o.curve_epochs = 3;
  const std::vector<std::string> c{"ctx"};
  const auto r = select_context(t, c, o);
  const auto j = nlohmann::json::parse(selection_report_json(r));
  CHECK(j["chosen"] == r.chosen);
  REQUIRE(j["candidates"].size() == 2);
  CHECK(j["candidates"][0]["joint_loss"].get<double>() == r.candidates[0].joint_loss);
  CHECK(j["candidates"][0]["curve"].size() == 3);

  const auto rows = selection_plot_rows(r);
  CHECK(rows.size() == 6);
  for (const auto& p : rows) CHECK(std::isfinite(p.y));
  // the first curve point is the one-epoch joint loss
  for (const auto& cand : r.candidates) {
    REQUIRE(cand.curve.size() == 3);
    CHECK(cand.curve[0] == doctest::Approx(cand.joint_loss).epsilon(1e-12));
  }
}

TEST_CASE("parallel_for: every index once, first exception by index") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);

  parallel_for(0, 4, [](std::size_t) { throw std::runtime_error("never"); });

  try {
    parallel_for(50, 8, [](std::size_t i) {
      if (i == 7 || i == 31) throw std::runtime_error("at " + std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "at 7");
  }
}
