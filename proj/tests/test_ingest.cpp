#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "cwae/csv.hpp"
#include "cwae/error.hpp"
#include "cwae/format.hpp"
#include "cwae/ingest.hpp"
#include "cwae/rng.hpp"
#include "test_util.hpp"

using namespace cwae;
using testing::raw_table;

namespace {

InferOptions labelled(std::size_t bins = 10) {
  InferOptions o;
  o.label_column = "label";
  o.numeric_bins = bins;
  return o;
}

}  // namespace

TEST_CASE("infer_schema: categorical distinct count") {
  const auto raw = raw_table({"x", "label"}, {{"a", "0"}, {"b", "0"}, {"a", "0"}});
  const auto s = infer_schema(raw, labelled());
  REQUIRE(s.columns.size() == 1);
  CHECK(s.columns[0].kind == ColumnKind::categorical);
  CHECK(s.columns[0].cardinality == 2);
  CHECK(s.candidate_context_columns == std::vector<std::string>{"x"});
}

TEST_CASE("infer_schema: 1000 distinct reals, 10 bins") {
  RawTable raw;
  raw.header = {"x", "label"};
  Rng r(1);
  for (int i = 0; i < 1000; ++i) raw.rows.push_back({format_double(r.uniform(-5, 5)), "0"});
  const auto s = infer_schema(raw, labelled(10));
  CHECK(s.columns[0].kind == ColumnKind::numeric_binned);
  CHECK(s.columns[0].bin_edges.size() == 9);
  CHECK(s.columns[0].cardinality == 10);
  // roughly equal mass per bin
  const auto t = encode_table(raw, s, VocabSource::fit);
  std::vector<int> counts(11, 0);
  for (auto v : t.cells) ++counts[v];
  CHECK(counts[0] == 0);
  for (int b = 1; b <= 10; ++b) CHECK(counts[b] == 100);
}

TEST_CASE("infer_schema: few numeric values stay categorical") {
  const auto raw = raw_table({"x", "label"}, {{"1", "0"}, {"2", "0"}, {"2", "0"}});
  const auto s = infer_schema(raw, labelled(10));
  CHECK(s.columns[0].kind == ColumnKind::categorical);
  CHECK(s.columns[0].cardinality == 2);
}

TEST_CASE("infer_schema: errors") {
  CHECK_THROWS_AS(infer_schema(raw_table({"x", "label"}, {}), labelled()), ValidationError);
  CHECK_THROWS_AS(infer_schema(raw_table({"x", "x", "label"}, {{"a", "b", "0"}}), labelled()),
                  ValidationError);
  InferOptions missing = labelled();
  missing.label_column = "nope";
  CHECK_THROWS_AS(infer_schema(raw_table({"x", "label"}, {{"a", "0"}}), missing), ValidationError);
  InferOptions bad_cand = labelled();
  bad_cand.candidate_context_columns = {"zzz"};
  CHECK_THROWS_AS(infer_schema(raw_table({"x", "label"}, {{"a", "0"}}), bad_cand), ValidationError);
  CHECK_THROWS_AS(infer_schema(raw_table({"x", "label"}, {{"a", "0", "extra"}}), labelled()),
                  ValidationError);
}

TEST_CASE("infer_schema: dropped columns are not features") {
  InferOptions o = labelled();
  o.drop_columns = {"id"};
  const auto s = infer_schema(raw_table({"id", "x", "label"}, {{"1", "a", "0"}}), o);
  CHECK(s.column_names() == std::vector<std::string>{"x"});
}

TEST_CASE("encode_table: unseen values map to the reserved index") {
  const auto fit_raw = raw_table({"x", "label"}, {{"A", "0"}, {"B", "0"}});
  const auto schema = encode_table(fit_raw, infer_schema(fit_raw, labelled()), VocabSource::fit).schema;
  const auto t = encode_table(raw_table({"x", "label"}, {{"A", "0"}, {"B", "0"}, {"C", "0"}}), schema,
                              VocabSource::existing);
  CHECK(t.cells == std::vector<std::int32_t>{1, 2, 0});
}

TEST_CASE("encode_table: fitting a vocabulary") {
  const auto raw = raw_table({"x", "label"}, {{"x", "0"}, {"x", "0"}, {"y", "0"}});
  const auto t = encode_table(raw, infer_schema(raw, labelled()), VocabSource::fit);
  CHECK(t.schema.columns[0].vocabulary.size() == 2);
  CHECK(t.schema.columns[0].cardinality == 2);
}

TEST_CASE("encode_table: binned values below/above every edge clamp") {
  RawTable raw;
  raw.header = {"x", "label"};
  for (int i = 0; i < 100; ++i) raw.rows.push_back({std::to_string(i), "0"});
  const auto s = infer_schema(raw, labelled(4));
  const auto t = encode_table(raw_table({"x", "label"}, {{"-1000", "0"}, {"1e9", "0"}, {"zz", "0"}}), s,
                              VocabSource::existing);
  CHECK(t.cells[0] == 1);
  CHECK(t.cells[1] == static_cast<std::int32_t>(s.columns[0].cardinality));
  CHECK(t.cells[2] == 0);
}

TEST_CASE("encode_table: decode round-trips every non-reserved index") {
  const auto t = testing::encode(testing::random_raw(3, 300, {2, 5, 9}, 10));
  const auto raw = testing::random_raw(3, 300, {2, 5, 9}, 10);
  for (std::size_t r = 0; r < t.n_rows; ++r)
    for (std::size_t c = 0; c < t.n_cols; ++c) {
      const auto v = t.at(r, c);
      REQUIRE(v > 0);
      CHECK(t.schema.columns[c].decode(v) == raw.rows[r][c]);
      CHECK(t.schema.columns[c].encode(raw.rows[r][c]) == v);
    }
  CHECK(t.schema.columns[0].decode(0).empty());
}

TEST_CASE("encode_table: label must be binary and match the positive label") {
  const auto three = raw_table({"x", "label"}, {{"a", "0"}, {"a", "1"}, {"a", "2"}});
  CHECK_THROWS_AS(encode_table(three, infer_schema(three, labelled()), VocabSource::fit), ValidationError);
  const auto words = raw_table({"x", "label"}, {{"a", "yes"}, {"a", "no"}});
  CHECK_THROWS_AS(encode_table(words, infer_schema(words, labelled()), VocabSource::fit), ValidationError);
  InferOptions o = labelled();
  o.positive_label = "yes";
  const auto t = encode_table(words, infer_schema(words, o), VocabSource::fit);
  CHECK(t.labels == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("encode_table: row length mismatch") {
  const auto good = raw_table({"x", "label"}, {{"a", "0"}});
  const auto schema = infer_schema(good, labelled());
  CHECK_THROWS_AS(encode_table(raw_table({"x", "label"}, {{"a"}}), schema, VocabSource::existing),
                  ValidationError);
}

TEST_CASE("split_dataset: worked example") {
  RawTable raw;
  raw.header = {"x", "label"};
  for (int i = 0; i < 12; ++i) raw.rows.push_back({"v" + std::to_string(i % 3), i < 2 ? "1" : "0"});
  const auto t = testing::encode(raw, {0.2, 0.2, 5});
  CHECK(t.count(Split::train) == 6);
  CHECK(t.count(Split::val) == 2);
  CHECK(t.count(Split::test) == 4);
  CHECK(t.split[0] == Split::test);
  CHECK(t.split[1] == Split::test);
  const auto again = testing::encode(raw, {0.2, 0.2, 5});
  CHECK(again.split == t.split);
}

TEST_CASE("split_dataset: invariants on random tables") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = testing::encode(testing::random_raw(seed, 50 + seed * 7, {3, 4}, seed % 6),
                                   {0.1, 0.2, seed});
    CHECK(t.count(Split::train) + t.count(Split::val) + t.count(Split::test) == t.n_rows);
    for (std::size_t r = 0; r < t.n_rows; ++r) {
      if (t.labels[r]) CHECK(t.split[r] == Split::test);
    }
    CHECK_NOTHROW(t.validate());
  }
}

TEST_CASE("split_dataset: errors") {
  RawTable raw;
  raw.header = {"x", "label"};
  for (int i = 0; i < 5; ++i) raw.rows.push_back({"a", "1"});
  CHECK_THROWS_AS(testing::encode(raw), ValidationError);
  const auto ok = testing::random_raw(1, 20, {2});
  CHECK_THROWS_AS(testing::encode(ok, {0.0, 0.2, 0}), ValidationError);
  CHECK_THROWS_AS(testing::encode(ok, {0.5, 0.5, 0}), ValidationError);
}

TEST_CASE("context_distribution: add-one smoothing") {
  RawTable raw;
  raw.header = {"c", "label"};
  for (const char* v : {"a", "a", "a", "b"}) raw.rows.push_back({v, "0"});
  auto t = encode_table(raw, infer_schema(raw, labelled()), VocabSource::fit);
  // all four rows in train
  const auto d = context_distribution(t, "c");
  CHECK(d.probability(1) == doctest::Approx(4.0 / 7));
  CHECK(d.probability(2) == doctest::Approx(2.0 / 7));
  CHECK(d.probability(0) == doctest::Approx(1.0 / 7));
  CHECK_THROWS_AS(context_distribution(t, "zzz"), ValidationError);
}

TEST_CASE("context_distribution: symmetric counts, positive, sums to one") {
  RawTable raw;
  raw.header = {"c", "label"};
  for (int i = 0; i < 30; ++i) raw.rows.push_back({"v" + std::to_string(i % 3), "0"});
  const auto t = encode_table(raw, infer_schema(raw, labelled()), VocabSource::fit);
  const auto d = context_distribution(t, "c");
  CHECK(d.probability(1) == d.probability(2));
  CHECK(d.probability(2) == d.probability(3));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rt = testing::encode(testing::random_raw(seed, 100, {1 + static_cast<int>(seed % 9)}, 3),
                                    {0.1, 0.2, seed});
    const auto rd = context_distribution(rt, "c0");
    double sum = 0;
    for (double p : rd.probabilities) {
      CHECK(p > 0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("dataset_stats") {
  const auto t = testing::encode(testing::random_raw(4, 100, {2, 4}, 5));
  const auto s = dataset_stats(t);
  CHECK(s.rows == 100);
  CHECK(s.features == 2);
  CHECK(s.anomalies == 5);
  CHECK(s.anomaly_ratio == doctest::Approx(0.05));
  CHECK(s.average_cardinality == doctest::Approx(3.0));
}

TEST_CASE("encoded dataset file round-trips and rejects corruption") {
  const auto dir = testing::temp_dir("ingest");
  const auto t = testing::encode(testing::random_raw(5, 80, {3, 2, 7}, 4), {0.1, 0.2, 9});
  save_encoded(dir / "a.cwds", t, "demo");
  std::string name;
  const auto back = load_encoded(dir / "a.cwds", &name);
  CHECK(name == "demo");
  CHECK(back.cells == t.cells);
  CHECK(back.labels == t.labels);
  CHECK(back.split == t.split);
  CHECK(schema_fingerprint(back.schema) == schema_fingerprint(t.schema));
  save_encoded(dir / "b.cwds", back, "demo");
  CHECK(read_file(dir / "a.cwds") == read_file(dir / "b.cwds"));

  const std::string bytes = read_file(dir / "a.cwds");
  write_file(dir / "cut.cwds", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_encoded(dir / "cut.cwds"), CorruptFileError);
  write_file(dir / "junk.cwds", "not a dataset");
  CHECK_THROWS_AS(load_encoded(dir / "junk.cwds"), CorruptFileError);
  std::string v2 = bytes;
  v2[8] = 2;
  write_file(dir / "v2.cwds", v2);
  CHECK_THROWS_AS(load_encoded(dir / "v2.cwds"), VersionMismatchError);
  CHECK_THROWS_AS(load_encoded(dir / "missing.cwds"), IoError);
}

TEST_CASE("schema JSON round-trip keeps the fingerprint") {
  RawTable raw = testing::random_raw(6, 200, {3, 4});
  raw.header.insert(raw.header.begin(), "num");
  Rng r(2);
  for (auto& row : raw.rows) row.insert(row.begin(), format_double(r.uniform()));
  const auto t = testing::encode(raw);
  CHECK(t.schema.columns[0].kind == ColumnKind::numeric_binned);
  const auto back = schema_from_json(schema_to_json(t.schema));
  CHECK(schema_fingerprint(back) == schema_fingerprint(t.schema));
  CHECK(back.columns[0].bin_edges == t.schema.columns[0].bin_edges);
  CHECK_THROWS_AS(schema_from_json("{"), ValidationError);
}
