#pragma once

#include <cstdint>
#include <span>

#include "sncpd/mat.hpp"

namespace sncpd {

// Gaussian kernel exp(-||x - y||^2 / (2 sigma^2)).
double rbf_kernel(std::span<const double> x, std::span<const double> y, double sigma);

// Median pairwise distance between rows, the usual bandwidth heuristic.
// Large inputs are subsampled to max_points rows first.
double median_heuristic_sigma(const Mat& points, std::size_t max_points = 256,
                              std::uint64_t seed = 0);

// Biased squared MMD between two row-sets under the Gaussian kernel,
// diagonal terms included. Clamped at zero against roundoff.
double mmd2_biased(const Mat& z, const Mat& xi, double sigma);
// Square root of the above; this is the quantity the deviation bound covers.
double mmd_biased(const Mat& z, const Mat& xi, double sigma);

// Acceptance threshold sqrt(2K/m) * (1 + sqrt(2 log(1/alpha))) for the
// biased MMD of two m-point samples under a kernel bounded by K.
double mmd_threshold(std::size_t m, double kernel_bound, double alpha);

// 1 - cos angle between two vectors.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Matrix-variate normal with separable row/column covariances.
struct MatrixNormalParams {
  Mat mean;     // n x p
  Mat row_cov;  // n x n SPD
  Mat col_cov;  // p x p SPD
};

double matrix_normal_logpdf(const Mat& x, const MatrixNormalParams& p);

// log p(x; alt) - log p(x; null).
double log_likelihood_ratio(const Mat& x, const MatrixNormalParams& null_params,
                            const MatrixNormalParams& alt_params);

// Squared Mahalanobis distance; the covariance gets a relative ridge of
// ridge * tr(cov)/d before factorization.
double mahalanobis2(std::span<const double> x, std::span<const double> mean,
                    const Mat& cov, double ridge = 1e-6);

}  // namespace sncpd
