#include <doctest.h>

#include <cmath>
#include <vector>

#include "cwae/error.hpp"
#include "cwae/model.hpp"
#include "cwae/rng.hpp"
#include "cwae/simd/kernels.hpp"
#include "test_util.hpp"

using namespace cwae;
using simd::Isa;

namespace {

std::vector<double> random_vec(Rng& r, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.uniform(-2.0, 2.0);
  return v;
}

// Vector variants reassociate sums and use FMA.
void check_close(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want[i]) <= 1e-12 * (1.0 + std::abs(want[i])));
  }
}

// Odd sizes hit the vector remainders.
const std::size_t kSizes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 4, 4}, {17, 9, 33}, {64, 32, 16}, {5, 130, 3}};

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  const auto& k = simd::scalar_kernels();
  Rng r(1);
  for (const auto& s : kSizes) {
    const std::size_t m = s[0], n = s[1], kk = s[2];
    const auto a = random_vec(r, m * kk), b = random_vec(r, kk * n);
    std::vector<double> c(m * n, 0.0), want(m * n, 0.0);
    k.gemm_nn(m, n, kk, a.data(), b.data(), c.data(), false);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < kk; ++p) want[i * n + j] += a[i * kk + p] * b[p * n + j];
    check_close(c, want);

    const auto x = random_vec(r, m * n);
    std::vector<double> d2(m * m);
    k.sq_dists(x.data(), m, x.data(), m, n, d2.data());
    for (std::size_t i = 0; i < m; ++i) CHECK(d2[i * m + i] == doctest::Approx(0.0));
  }
}

TEST_CASE("every supported ISA agrees with the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  for (Isa isa : simd::supported_isas()) {
    CAPTURE(simd::isa_name(isa));
    const auto& k = simd::kernels_for(isa);
    CHECK(k.isa == isa);
    Rng r(11);
    for (const auto& s : kSizes) {
      const std::size_t m = s[0], n = s[1], kk = s[2];
      {
        const auto a = random_vec(r, m * kk), b = random_vec(r, kk * n);
        auto c0 = random_vec(r, m * n);
        auto c1 = c0;
        ref.gemm_nn(m, n, kk, a.data(), b.data(), c0.data(), true);
        k.gemm_nn(m, n, kk, a.data(), b.data(), c1.data(), true);
        check_close(c1, c0);
        ref.gemm_nn(m, n, kk, a.data(), b.data(), c0.data(), false);
        k.gemm_nn(m, n, kk, a.data(), b.data(), c1.data(), false);
        check_close(c1, c0);
      }
      {
        const auto a = random_vec(r, m * kk), b = random_vec(r, m * n);
        auto c0 = random_vec(r, kk * n);
        auto c1 = c0;
        ref.gemm_tn(m, n, kk, a.data(), b.data(), c0.data());
        k.gemm_tn(m, n, kk, a.data(), b.data(), c1.data());
        check_close(c1, c0);
      }
      {
        const auto a = random_vec(r, m * n), b = random_vec(r, kk * n);
        auto c0 = random_vec(r, m * kk);
        auto c1 = c0;
        ref.gemm_nt(m, n, kk, a.data(), b.data(), c0.data(), true);
        k.gemm_nt(m, n, kk, a.data(), b.data(), c1.data(), true);
        check_close(c1, c0);
      }
      {
        const auto x = random_vec(r, n * kk), y = random_vec(r, n * kk);
        CHECK(std::abs(k.dot(x.data(), y.data(), x.size()) - ref.dot(x.data(), y.data(), x.size())) < 1e-11);
        auto y0 = y, y1 = y;
        ref.axpy(0.37, x.data(), y0.data(), x.size());
        k.axpy(0.37, x.data(), y1.data(), x.size());
        check_close(y1, y0);
      }
      {
        const auto a = random_vec(r, m * n), b = random_vec(r, kk * n);
        std::vector<double> d0(m * kk), d1(m * kk);
        ref.sq_dists(a.data(), m, b.data(), kk, n, d0.data());
        k.sq_dists(a.data(), m, b.data(), kk, n, d1.data());
        check_close(d1, d0);
      }
      {
        const std::size_t len = m * n + kk;
        auto p0 = random_vec(r, len), g = random_vec(r, len), m0 = random_vec(r, len), v0 = random_vec(r, len);
        for (auto& v : v0) v = std::abs(v);
        auto p1 = p0, m1 = m0, v1 = v0;
        const simd::AdamCoeffs co{1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
        ref.adam_update(p0.data(), g.data(), m0.data(), v0.data(), len, co);
        k.adam_update(p1.data(), g.data(), m1.data(), v1.data(), len, co);
        check_close(p1, p0);
        check_close(m1, m0);
        check_close(v1, v0);
      }
    }
  }
}

TEST_CASE("model loss is the same under every ISA") {
  const auto table = testing::encode(testing::contextual_raw(5, 60, 0));
  ModelConfig cfg = ModelConfig::for_context(table.schema, {"ctx"});
  cfg.seed = 3;
  CwaeModel model(cfg, table.schema);
  std::vector<std::size_t> rows(table.n_rows);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const Batch batch = Batch::gather(table, rows);
  Tensor prior({rows.size(), model.mmd_dim()});
  Rng r(2);
  for (auto& v : prior.values()) v = r.normal();

  const Isa saved = simd::active().isa;
  simd::set_active(Isa::scalar);
  const LossValue want = model.loss(batch, prior);
  for (Isa isa : simd::supported_isas()) {
    simd::set_active(isa);
    const LossValue got = model.loss(batch, prior);
    CHECK(got.total == doctest::Approx(want.total).epsilon(1e-12));
    CHECK(got.mmd == doctest::Approx(want.mmd).epsilon(1e-10));
  }
  simd::set_active(saved);
}

TEST_CASE("isa names and errors") {
  CHECK(simd::parse_isa("scalar") == Isa::scalar);
  CHECK(simd::isa_name(Isa::avx2) == "avx2");
  CHECK_THROWS_AS(simd::parse_isa("sse9"), ValidationError);
  CHECK(simd::isa_supported(Isa::scalar));
#if defined(__x86_64__)
  CHECK_THROWS_AS(simd::kernels_for(Isa::neon), ValidationError);
#endif
}
