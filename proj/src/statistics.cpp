#include "sncpd/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sncpd/errors.hpp"
#include "sncpd/rng.hpp"

namespace sncpd {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("rbf_kernel: sigma must be positive");
  const double d = dist2(x, y);
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

double median_heuristic_sigma(const Mat& points, std::size_t max_points,
                              std::uint64_t seed) {
  if (points.rows() < 2)
    throw ConfigError("median_heuristic_sigma: need at least two points");
  std::vector<std::size_t> idx(points.rows());
  std::iota(idx.begin(), idx.end(), 0);
  if (points.rows() > max_points) {
    Rng rng = make_rng(seed, Stream::Bandwidth);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(max_points);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> dists;
  dists.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      dists.push_back(dist2(points.row(idx[a]), points.row(idx[b])));
  auto mid = dists.begin() + dists.size() / 2;
  std::nth_element(dists.begin(), mid, dists.end());
  double med = *mid;
  if (dists.size() % 2 == 0) {
    auto lo = std::max_element(dists.begin(), mid);
    med = 0.5 * (med + *lo);
  }
  if (med <= 0.0) {
    warn("median_heuristic_sigma: degenerate sample, falling back to 1");
    return 1.0;
  }
  return med;
}

double mmd2_biased(const Mat& z, const Mat& xi, double sigma) {
  if (z.rows() == 0 || xi.rows() == 0) throw DimensionError("mmd2_biased: empty sample");
  if (z.cols() != xi.cols()) throw DimensionError("mmd2_biased: dimension mismatch");
  const std::size_t m = z.rows(), n = xi.rows();
  double kzz = 0.0, kxx = 0.0, kzx = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) kzz += rbf_kernel(z.row(i), z.row(j), sigma);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) kxx += rbf_kernel(xi.row(i), xi.row(j), sigma);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) kzx += rbf_kernel(z.row(i), xi.row(j), sigma);
  const double mm = static_cast<double>(m), nn = static_cast<double>(n);
  const double v = kzz / (mm * mm) + kxx / (nn * nn) - 2.0 * kzx / (mm * nn);
  return std::max(v, 0.0);
}

double mmd_biased(const Mat& z, const Mat& xi, double sigma) {
  return std::sqrt(mmd2_biased(z, xi, sigma));
}

double mmd_threshold(std::size_t m, double kernel_bound, double alpha) {
  if (m == 0) throw ConfigError("mmd_threshold: empty sample");
  if (!(kernel_bound > 0.0)) throw ConfigError("mmd_threshold: kernel bound must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("mmd_threshold: alpha must be in (0,1)");
  const double mm = static_cast<double>(m);
  return std::sqrt(2.0 * kernel_bound / mm) * (1.0 + std::sqrt(2.0 * std::log(1.0 / alpha)));
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_distance: size mismatch");
  const double na = norm2(a), nb = norm2(b);
  if (na < 1e-300 || nb < 1e-300) {
    warn("cosine_distance: zero vector");
    return (na < 1e-300 && nb < 1e-300) ? 0.0 : 1.0;
  }
  double c = dot(a, b) / (na * nb);
  c = std::clamp(c, -1.0, 1.0);
  return 1.0 - c;
}

double matrix_normal_logpdf(const Mat& x, const MatrixNormalParams& p) {
  const std::size_t n = x.rows(), d = x.cols();
  if (p.mean.rows() != n || p.mean.cols() != d)
    throw DimensionError("matrix_normal_logpdf: mean shape differs from sample");
  if (p.row_cov.rows() != n || p.row_cov.cols() != n)
    throw DimensionError("matrix_normal_logpdf: row covariance must be n x n");
  if (p.col_cov.rows() != d || p.col_cov.cols() != d)
    throw DimensionError("matrix_normal_logpdf: column covariance must be p x p");

  const Mat lu = cholesky(p.row_cov);
  const Mat lv = cholesky(p.col_cov);

  Mat delta(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) delta(i, j) = x(i, j) - p.mean(i, j);

  // C = U^{-1} (X - M), column by column.
  Mat c(n, d);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = delta(i, j);
    std::vector<double> sol = cholesky_solve(lu, col);
    for (std::size_t i = 0; i < n; ++i) c(i, j) = sol[i];
  }
  // S = (X - M)^T C, then trace of V^{-1} S.
  Mat s = matmul(delta.transposed(), c);
  double quad = 0.0;
  std::vector<double> scol(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) scol[i] = s(i, j);
    std::vector<double> sol = cholesky_solve(lv, scol);
    quad += sol[j];
  }

  const double nn = static_cast<double>(n), dd = static_cast<double>(d);
  return -0.5 * (nn * dd * std::log(2.0 * M_PI) + dd * cholesky_logdet(lu) +
                 nn * cholesky_logdet(lv) + quad);
}

double log_likelihood_ratio(const Mat& x, const MatrixNormalParams& null_params,
                            const MatrixNormalParams& alt_params) {
  return matrix_normal_logpdf(x, alt_params) - matrix_normal_logpdf(x, null_params);
}

double mahalanobis2(std::span<const double> x, std::span<const double> mean,
                    const Mat& cov, double ridge) {
  const std::size_t d = x.size();
  if (mean.size() != d || cov.rows() != d || cov.cols() != d)
    throw DimensionError("mahalanobis2: dimension mismatch");
  double tr = 0.0;
  for (std::size_t i = 0; i < d; ++i) tr += cov(i, i);
  Mat reg = cov;
  const double eps = ridge * tr / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) reg(i, i) += eps;
  Mat l = cholesky(reg);
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < d; ++i) delta[i] = x[i] - mean[i];
  std::vector<double> sol = cholesky_solve(l, delta);
  double q = 0.0;
  for (std::size_t i = 0; i < d; ++i) q += delta[i] * sol[i];
  return q;
}

}  // namespace sncpd
