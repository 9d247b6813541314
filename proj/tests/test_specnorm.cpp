#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sncpd/specnorm.hpp"
#include "support/oracles.hpp"

using namespace sncpd;

namespace {

Mat random_mat(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

}  // namespace

TEST_CASE("power iteration matches Jacobi singular values") {
  Rng rng(42);
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{8, 8}, {12, 5}, {5, 12}, {1, 7}}) {
    Mat w = random_mat(r, c, rng);
    const double pi_est = spectral_norm(w);
    const auto sv = oracles::singular_values(w);
    CHECK(pi_est == doctest::Approx(sv.front()).epsilon(1e-8));
  }
}

TEST_CASE("known spectrum of a diagonal matrix") {
  Mat w(3, 3);
  w(0, 0) = 4.0;
  w(1, 1) = -2.0;
  w(2, 2) = 0.5;
  CHECK(spectral_norm(w) == doctest::Approx(4.0));
  CHECK(min_singular_value(w) == doctest::Approx(0.5));
}

TEST_CASE("min singular value matches Jacobi on random matrices") {
  Rng rng(43);
  for (std::size_t n : {4, 9, 16}) {
    Mat w = random_mat(n, n, rng);
    const auto sv = oracles::singular_values(w);
    CHECK(min_singular_value(w) == doctest::Approx(sv.back()).epsilon(1e-6));
  }
}

TEST_CASE("projection caps the norm and leaves small weights alone") {
  Rng rng(44);
  Mat w = random_mat(10, 10, rng, 1.0);
  Tensor wt = Tensor::from_mat(w, true);
  SpectralNormState state;
  const double before = oracles::singular_values(w).front();
  REQUIRE(before > 0.9);

  const double est = project_spectral_norm(wt, 0.9, state, 0);
  CHECK(est == doctest::Approx(before).epsilon(1e-8));
  const double after = oracles::singular_values(weight_matrix_view(wt)).front();
  CHECK(after == doctest::Approx(0.9).epsilon(1e-8));

  // Projection is idempotent once the cap holds.
  std::vector<double> frozen = wt.values();
  project_spectral_norm(wt, 0.9, state, 0);
  double drift = 0.0;
  for (std::size_t i = 0; i < frozen.size(); ++i)
    drift = std::max(drift, std::abs(frozen[i] - wt.values()[i]));
  CHECK(drift < 1e-9);

  // A weight already under the cap is returned bit-identical.
  Mat small = random_mat(6, 6, rng, 0.01);
  Tensor st = Tensor::from_mat(small, true);
  SpectralNormState s2;
  std::vector<double> orig = st.values();
  project_spectral_norm(st, 0.9, s2, 0);
  CHECK(st.values() == orig);
}

TEST_CASE("warm start tracks a slowly changing weight") {
  Rng rng(45);
  Mat w = random_mat(16, 16, rng);
  Tensor wt = Tensor::from_mat(w, true);
  SpectralNormState state;
  // First call converges from cold.
  double est = project_spectral_norm(wt, 0.8, state, 1);
  CHECK(oracles::singular_values(weight_matrix_view(wt)).front() ==
        doctest::Approx(0.8).epsilon(1e-8));
  // Simulated training: small parameter updates, one power step per call.
  std::normal_distribution<double> d(0.0, 1e-3);
  for (int step = 0; step < 200; ++step) {
    for (auto& x : wt.values()) x += d(rng);
    est = project_spectral_norm(wt, 0.8, state, 1);
  }
  const double exact = oracles::singular_values(weight_matrix_view(wt)).front();
  CHECK(est == doctest::Approx(exact).epsilon(1e-3));
  CHECK(exact < 0.8 * (1.0 + 1e-4));
}

TEST_CASE("conv kernels are flattened for normalization") {
  Rng rng(46);
  std::vector<double> kv(4 * 3 * 5);
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& x : kv) x = d(rng);
  Tensor kernel({4, 3, 5}, kv, true);
  Mat view = weight_matrix_view(kernel);
  REQUIRE(view.rows() == 4);
  REQUIRE(view.cols() == 15);
  for (std::size_t o = 0; o < 4; ++o)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < 5; ++j)
        CHECK(view(o, c * 5 + j) == kv[(o * 3 + c) * 5 + j]);

  SpectralNormState state;
  project_spectral_norm(kernel, 0.5, state, 0);
  CHECK(oracles::singular_values(weight_matrix_view(kernel)).front() ==
        doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("invalid inputs") {
  Tensor w({2, 2}, {1, 0, 0, 1}, true);
  SpectralNormState state;
  CHECK_THROWS_AS(project_spectral_norm(w, 0.0, state, 0), ConfigError);
  Tensor r1({4}, {1, 2, 3, 4});
  CHECK_THROWS_AS(weight_matrix_view(r1), DimensionError);
}
