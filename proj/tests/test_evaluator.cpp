#include <doctest.h>

#include <cfloat>
#include <cmath>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/evaluator.hpp"
#include "cwae/rng.hpp"
#include "test_util.hpp"

using namespace cwae;

namespace {

std::vector<ScoreRecord> records(const std::vector<double>& neg, const std::vector<double>& pos) {
  std::vector<ScoreRecord> out;
  for (double r : neg) out.push_back({out.size(), r, 0, r, false});
  for (double r : pos) out.push_back({out.size(), r, 0, r, true});
  return out;
}

// Pair counting written independently of the library.
double mann_whitney(const std::vector<ScoreRecord>& recs) {
  double wins = 0, pairs = 0;
  for (const auto& p : recs) {
    if (!p.anomaly) continue;
    for (const auto& n : recs) {
      if (n.anomaly) continue;
      pairs += 1;
      wins += p.ratio > n.ratio ? 1.0 : p.ratio == n.ratio ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

std::vector<ScoreRecord> random_instance(Rng& rng, std::size_t per_class) {
  // overlapping lognormal classes, shifted by a random margin
  const double shift = rng.uniform() * 1.5;
  std::vector<double> neg, pos;
  for (std::size_t i = 0; i < per_class; ++i) neg.push_back(std::exp(0.5 * rng.normal()));
  for (std::size_t i = 0; i < per_class; ++i) pos.push_back(std::exp(0.5 * rng.normal() + shift));
  return records(neg, pos);
}

}  // namespace

TEST_CASE("fit_thresholds: max per context, global fallback") {
  const std::vector<double> s{0.2, 0.5, 1.0};
  const std::vector<std::int32_t> c{1, 1, 2};
  const auto t = fit_thresholds(s, c, "ctx");
  CHECK(t.thresholds.size() == 2);
  CHECK(t.threshold_for(1) == 0.5);
  CHECK(t.threshold_for(2) == 1.0);
  CHECK(t.global_fallback == 1.0);
  CHECK(t.threshold_for(7) == 1.0);

  const auto g = fit_thresholds(s, {});
  CHECK(g.context_column.empty());
  CHECK(g.threshold_for(0) == 1.0);
  CHECK(g.threshold_for(5) == 1.0);

  const std::vector<double> one{0.3};
  const std::vector<std::int32_t> oc{4};
  CHECK(fit_thresholds(one, oc, "ctx").threshold_for(4) == 0.3);

  const std::vector<double> zeros{0.0, 0.0};
  const std::vector<std::int32_t> zc{1, 1};
  CHECK(fit_thresholds(zeros, zc, "ctx").threshold_for(1) == DBL_MIN);
}

TEST_CASE("contextual_ratios: examples and homogeneity") {
  const std::vector<double> train{0.2, 0.5, 1.0};
  const std::vector<std::int32_t> tc{1, 1, 2};
  const auto t = fit_thresholds(train, tc, "ctx");
  const std::vector<std::size_t> rows{10, 11};
  const std::vector<double> s{0.25, 2.0};
  const std::vector<std::int32_t> c{1, 9};
  const std::vector<std::uint8_t> l{0, 1};
  const auto r = contextual_ratios(rows, s, c, l, t);
  REQUIRE(r.size() == 2);
  CHECK(r[0].ratio == 0.5);
  CHECK(r[0].row == 10);
  CHECK(r[1].ratio == 2.0);
  CHECK(r[1].anomaly);

  Rng rng(3);
  std::vector<double> tr(40), te(30);
  std::vector<std::int32_t> trc(40), tec(30);
  std::vector<std::size_t> ids(30);
  std::vector<std::uint8_t> lab(30, 0);
  for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = rng.uniform() * 5, trc[i] = rng.below(4);
  for (std::size_t i = 0; i < te.size(); ++i) te[i] = rng.uniform() * 5, tec[i] = rng.below(5), ids[i] = i;
  const auto base = contextual_ratios(ids, te, tec, lab, fit_thresholds(tr, trc, "ctx"));
  for (double alpha : {0.5, 4.0}) {  // powers of two keep it bit-exact
    auto tr2 = tr, te2 = te;
    for (auto& v : tr2) v *= alpha;
    for (auto& v : te2) v *= alpha;
    const auto scaled = contextual_ratios(ids, te2, tec, lab, fit_thresholds(tr2, trc, "ctx"));
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(scaled[i].ratio == base[i].ratio);
  }
}

TEST_CASE("aucroc_grid: separation, anti-separation, degenerate") {
  CHECK(aucroc_grid(records({0.1, 0.2}, {0.8, 0.9})).aucroc == 1.0);
  CHECK(aucroc_grid(records({0.8, 0.9}, {0.1, 0.2})).aucroc == 0.0);
  const auto r = aucroc_grid(records({0.1, 0.2}, {0.8, 0.9}));
  CHECK(r.thresholds.size() == kGridSteps);
  CHECK(r.thresholds.front() == doctest::Approx(0.009).epsilon(1e-12));
  CHECK(r.thresholds.back() == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(r.positives == 2);
  CHECK(r.negatives == 2);
  CHECK_THROWS_AS(aucroc_grid(records({0.1, 0.2}, {})), DegenerateLabelsError);
  CHECK_THROWS_AS(aucroc_grid(records({}, {0.1})), DegenerateLabelsError);
  CHECK_THROWS_AS(exact_auc(records({0.1}, {})), DegenerateLabelsError);
}

TEST_CASE("exact_auc: hand-counted examples") {
  CHECK(exact_auc(records({1}, {2})) == 1.0);
  CHECK(exact_auc(records({1}, {1})) == 0.5);
  CHECK(exact_auc(records({2, 0}, {3, 1})) == 0.75);
}

TEST_CASE("aucroc_grid tracks the pair-count oracle") {
  Rng rng(2025);
  double worst50 = 0, worst10 = 0;
  for (int i = 0; i < 100; ++i) {
    const auto a = random_instance(rng, 50 + rng.below(50));
    const double oracle = mann_whitney(a);
    CHECK(exact_auc(a) == doctest::Approx(oracle).epsilon(1e-12));
    worst50 = std::max(worst50, std::abs(aucroc_grid(a).aucroc - oracle));
    const auto b = random_instance(rng, 10 + rng.below(10));
    worst10 = std::max(worst10, std::abs(aucroc_grid(b).aucroc - mann_whitney(b)));
  }
  MESSAGE("max |grid - exact|: " << worst50 << " (>=50/class), " << worst10 << " (>=10/class)");
  CHECK(worst50 < 0.02);
  CHECK(worst10 < 0.05);
}

TEST_CASE("aucroc_grid is scale invariant") {
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    auto a = random_instance(rng, 40);
    const auto base = aucroc_grid(a);
    for (auto& r : a) r.ratio *= 8.0;
    const auto scaled = aucroc_grid(a);
    CHECK(scaled.aucroc == base.aucroc);
    CHECK(scaled.tpr == base.tpr);
    CHECK(scaled.fpr == base.fpr);
  }
}

TEST_CASE("variance_decomposition: examples") {
  const std::vector<double> y{0, 2, 10, 12};
  const std::vector<std::int32_t> g{1, 1, 2, 2};
  const auto v = variance_decomposition(y, g);
  CHECK(v.total == doctest::Approx(26));
  CHECK(v.within == doctest::Approx(1));
  CHECK(v.between == doctest::Approx(25));
  CHECK(v.within_ratio() == doctest::Approx(1.0 / 26));

  const std::vector<double> flat{3, 3, 3};
  const std::vector<std::int32_t> fg{0, 1, 1};
  const auto f = variance_decomposition(flat, fg);
  CHECK(f.total == 0);
  CHECK(f.within == 0);
  CHECK(f.between == 0);
  CHECK(f.within_ratio() == 0);

  const std::vector<double> s{1, 4, 9};
  const std::vector<std::int32_t> sg{5, 5, 5};
  const auto one = variance_decomposition(s, sg);
  CHECK(one.between == doctest::Approx(0).epsilon(1e-15));
  CHECK(one.within == doctest::Approx(one.total));
}

TEST_CASE("variance_decomposition: total variance law on random data") {
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> y(n);
    std::vector<std::int32_t> g(n);
    for (std::size_t k = 0; k < n; ++k) {
      g[k] = static_cast<std::int32_t>(rng.below(1 + rng.below(8)));
      y[k] = rng.normal() * 3 + g[k];
    }
    const auto v = variance_decomposition(y, g);
    CHECK(testing::rel_err(v.sum(), v.total) < 1e-9);
    CHECK(v.within >= 0);
    CHECK(v.between >= 0);
  }
}

TEST_CASE("variance_decomposition on an encoded table") {
  const auto t = testing::encode(testing::contextual_raw(4, 500, 0), {0.1, 0.2, 4});
  const auto rows = t.rows_in(Split::train);
  const auto r = variance_decomposition(t, "ctx", rows);
  CHECK(r.context_column == "ctx");
  CHECK(r.dimensions.size() >= 3 * 2);
  double total = 0;
  for (const auto& d : r.dimensions) {
    CHECK(testing::rel_err(d.parts.sum(), d.parts.total) < 1e-9);
    total += d.parts.total;
  }
  CHECK(r.summed.total == doctest::Approx(total).epsilon(1e-12));
  CHECK(r.summed.within_ratio() <= 1.0);
  // content here is mostly a function of ctx
  CHECK(r.summed.within_ratio() < 0.5);
  CHECK_THROWS_AS(variance_decomposition(t, "absent", rows), ValidationError);
}

TEST_CASE("plot CSV: format, headers-only, exact round-trip") {
  const RawTable raw = testing::raw_table({"ctx", "y", "label"}, {{"c1", "a", "0"}, {"c2", "b", "0"}});
  InferOptions o;
  o.label_column = "label";
  const auto schema = infer_schema(raw, o);
  ThresholdTable t;
  t.context_column = "ctx";
  t.thresholds[schema.columns[schema.index_of("ctx")].encode("c1")] = 0.5;
  const auto rows = threshold_plot_rows(t, schema);
  REQUIRE(rows.size() == 1);
  const std::string csv = format_plot_csv(rows);
  CHECK(csv.find("\nthresholds,c1,0.5\n") != std::string::npos);

  CHECK(format_plot_csv({}) == "series,x,y\n");
  CHECK(parse_plot_csv(format_plot_csv({})).empty());

  Rng rng(6);
  std::vector<PlotRow> many;
  for (int i = 0; i < 200; ++i)
    many.push_back({"s" + std::to_string(i % 3), std::to_string(i), rng.normal() * std::exp(rng.normal() * 20)});
  many.push_back({"odd, name", "x\"q", 0.1});
  const auto back = parse_plot_csv(format_plot_csv(many));
  REQUIRE(back.size() == many.size());
  for (std::size_t i = 0; i < many.size(); ++i) {
    CHECK(back[i].series == many[i].series);
    CHECK(back[i].x == many[i].x);
    CHECK(back[i].y == many[i].y);
  }

  const auto dir = testing::temp_dir("plots");
  write_plot_csv(dir / "a.csv", many);
  CHECK(read_file(dir / "a.csv") == format_plot_csv(many));
  write_plot_csv(dir / "missing" / "deeper" / "a.csv", many);  // parents are created
  CHECK_THROWS_AS(write_plot_csv(dir / "a.csv" / "b.csv", many), IoError);
}
