#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rwrl/kernels.hpp"

namespace k = rwrl::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void require_close(const std::vector<double>& a, const std::vector<double>& b,
                   double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(a[i])));
  }
}

}  // namespace

TEST_CASE("scalar kernels compute the textbook results") {
  const std::vector<double> w{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> b{0.5, -1};
  const std::vector<double> x{1, 0, -1};
  std::vector<double> y(2);
  k::scalar::gemv(w.data(), b.data(), x.data(), y.data(), 2, 3);
  CHECK(y[0] == doctest::Approx(-1.5));
  CHECK(y[1] == doctest::Approx(-3.0));

  std::vector<double> xg(3, 0.0);
  const std::vector<double> g{1, 2};
  k::scalar::gemv_t_acc(w.data(), g.data(), xg.data(), 2, 3);
  CHECK(xg == std::vector<double>{9, 12, 15});

  std::vector<double> wg(6, 0.0);
  k::scalar::ger_acc(g.data(), x.data(), wg.data(), 2, 3);
  CHECK(wg == std::vector<double>{1, 0, -1, 2, 0, -2});
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!k::backend_supported(k::Backend::kAvx2)) {
    MESSAGE("AVX2 not available; skipping equivalence check");
    return;
  }
  std::mt19937_64 rng(17);
  for (std::size_t rows : {1u, 3u, 16u, 33u, 64u}) {
    for (std::size_t cols : {1u, 2u, 5u, 8u, 16u, 31u, 64u}) {
      const auto w = random_vec(rng, rows * cols);
      const auto b = random_vec(rng, rows);
      const auto x = random_vec(rng, cols);
      const auto g = random_vec(rng, rows);

      std::vector<double> y_s(rows), y_v(rows);
      k::scalar::gemv(w.data(), b.data(), x.data(), y_s.data(), rows, cols);
      k::avx2::gemv(w.data(), b.data(), x.data(), y_v.data(), rows, cols);
      require_close(y_s, y_v);

      auto xg_s = random_vec(rng, cols);
      auto xg_v = xg_s;
      k::scalar::gemv_t_acc(w.data(), g.data(), xg_s.data(), rows, cols);
      k::avx2::gemv_t_acc(w.data(), g.data(), xg_v.data(), rows, cols);
      require_close(xg_s, xg_v);

      auto wg_s = random_vec(rng, rows * cols);
      auto wg_v = wg_s;
      k::scalar::ger_acc(g.data(), x.data(), wg_s.data(), rows, cols);
      k::avx2::ger_acc(g.data(), x.data(), wg_v.data(), rows, cols);
      require_close(wg_s, wg_v);

      const double d_s = k::scalar::dot(x.data(), x.data(), cols);
      const double d_v = k::avx2::dot(x.data(), x.data(), cols);
      CHECK(std::abs(d_s - d_v) <= 1e-12 * (1.0 + d_s));
    }
  }
}

TEST_CASE("avx2 adam update matches scalar and honours the mask") {
  if (!k::backend_supported(k::Backend::kAvx2)) return;
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 4u, 7u, 37u}) {
    auto p_s = random_vec(rng, n);
    auto g = random_vec(rng, n);
    auto m_s = random_vec(rng, n);
    auto v_s = random_vec(rng, n);
    for (auto& v : v_s) v = std::abs(v);
    std::vector<unsigned char> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = (i % 3) != 1;
    auto p_v = p_s, m_v = m_s, v_v = v_s;
    const auto p0 = p_s;
    const k::AdamCoefficients c{1e-3, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9,
                                1 - 0.999 * 0.999};
    k::scalar::adam_update(p_s.data(), g.data(), m_s.data(), v_s.data(),
                           mask.data(), n, c);
    k::avx2::adam_update(p_v.data(), g.data(), m_v.data(), v_v.data(),
                         mask.data(), n, c);
    require_close(p_s, p_v);
    require_close(m_s, m_v);
    require_close(v_s, v_v);
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) CHECK(p_v[i] == p0[i]);
    }
  }
}

TEST_CASE("backend selection can be overridden") {
  const auto before = k::active_backend();
  k::set_backend(k::Backend::kScalar);
  CHECK(k::active_backend() == k::Backend::kScalar);
  const std::vector<double> x{1, 2, 3};
  CHECK(k::dot(x, x) == doctest::Approx(14.0));
  k::set_backend(before);
}
