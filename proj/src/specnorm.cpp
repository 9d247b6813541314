#include "sncpd/specnorm.hpp"

#include <cmath>

#include "sncpd/rng.hpp"

namespace sncpd {

namespace {

void seed_vector(std::vector<double>& v, std::size_t n, std::uint64_t salt) {
  Rng rng(0x5370ec7421ull ^ (salt * 0x9e3779b97f4a7c15ull));
  std::normal_distribution<double> d(0.0, 1.0);
  v.resize(n);
  double s = 0.0;
  for (auto& x : v) {
    x = d(rng);
    s += x * x;
  }
  s = std::sqrt(s);
  for (auto& x : v) x /= s;
}

bool normalize_inplace(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  s = std::sqrt(s);
  if (s < 1e-300) return false;
  for (auto& x : v) x /= s;
  return true;
}

// One u/v update; returns the current estimate u^T W v, or 0 for a zero map.
double power_step(const Mat& w, std::vector<double>& u, std::vector<double>& v) {
  std::vector<double> wtu = matvec_t(w, u);
  if (!normalize_inplace(wtu)) return 0.0;
  v = std::move(wtu);
  std::vector<double> wv = matvec(w, v);
  if (!normalize_inplace(wv)) return 0.0;
  u = std::move(wv);
  return dot(u, matvec(w, v));
}

}  // namespace

Mat weight_matrix_view(const Tensor& w) {
  if (w.rank() == 2) return w.to_mat();
  if (w.rank() == 3) {
    const std::size_t co = w.shape()[0];
    const std::size_t inner = w.shape()[1] * w.shape()[2];
    Mat m(co, inner);
    std::copy(w.values().begin(), w.values().end(), m.data());
    return m;
  }
  throw DimensionError("weight_matrix_view: expected rank 2 or 3 weight");
}

double estimate_spectral_norm(const Mat& w, SpectralNormState& state, int iterations) {
  if (w.rows() == 0 || w.cols() == 0) throw DimensionError("estimate_spectral_norm: empty matrix");
  bool converge = iterations <= 0;
  if (!state.initialized() || state.u.size() != w.rows() || state.v.size() != w.cols()) {
    seed_vector(state.u, w.rows(), w.rows() * 1315423911ull + w.cols());
    state.v.assign(w.cols(), 0.0);
    converge = true;
  }
  double est = state.last_estimate;
  if (converge) {
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      est = power_step(w, state.u, state.v);
      if (est == 0.0) break;
      if (std::abs(est - prev) <= 1e-12 * std::max(est, 1.0)) break;
      prev = est;
    }
  } else {
    for (int i = 0; i < iterations; ++i) est = power_step(w, state.u, state.v);
  }
  state.last_estimate = est;
  return est;
}

double spectral_norm(const Mat& w, int max_iterations, double tol) {
  SpectralNormState state;
  seed_vector(state.u, w.rows(), w.rows() * 2654435761ull + w.cols());
  state.v.assign(w.cols(), 0.0);
  double est = 0.0, prev = -1.0;
  for (int i = 0; i < max_iterations; ++i) {
    est = power_step(w, state.u, state.v);
    if (est == 0.0) break;
    if (std::abs(est - prev) <= tol * std::max(est, 1.0)) break;
    prev = est;
  }
  return est;
}

double min_singular_value(const Mat& w, int max_iterations, double tol) {
  const std::size_t n = w.cols();
  const double smax = spectral_norm(w);
  if (smax == 0.0) return 0.0;
  // Flip the spectrum of W^T W: the dominant eigenvector of mu*I - W^T W
  // belongs to the smallest singular value.
  const double mu = smax * smax * (1.0 + 1e-9);
  Mat wtw(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < w.rows(); ++r) s += w(r, i) * w(r, j);
      wtw(i, j) = s;
    }
  std::vector<double> x;
  seed_vector(x, n, n * 40503ull + w.rows());
  double lambda = 0.0, prev = -1.0;
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> cx = matvec(wtw, x);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = mu * x[i] - cx[i];
    if (!normalize_inplace(y)) return 0.0;  // exactly singular direction hit
    x = std::move(y);
    std::vector<double> cx2 = matvec(wtw, x);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) quad += x[i] * (mu * x[i] - cx2[i]);
    lambda = quad;
    if (std::abs(lambda - prev) <= tol * std::max(std::abs(lambda), 1.0)) break;
    prev = lambda;
  }
  const double smin2 = mu - lambda;
  return std::sqrt(std::max(smin2, 0.0));
}

double project_spectral_norm(Tensor& w, double cap, SpectralNormState& state,
                             int iterations) {
  if (!(cap > 0.0)) throw ConfigError("project_spectral_norm: cap must be positive");
  Mat view = weight_matrix_view(w);
  const double est = estimate_spectral_norm(view, state, iterations);
  if (est > cap) {
    const double factor = cap / est;
    for (auto& x : w.values()) x *= factor;
    state.last_estimate = cap;
  }
  return est;
}

}  // namespace sncpd
