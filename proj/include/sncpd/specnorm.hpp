#pragma once

#include <vector>

#include "sncpd/diffcore.hpp"
#include "sncpd/mat.hpp"

namespace sncpd {

// Warm-start vectors for power iteration, kept per weight across steps.
struct SpectralNormState {
  std::vector<double> u, v;
  double last_estimate = 0.0;
  bool initialized() const { return !u.empty(); }
};

// Matrix view of a weight tensor: rank 2 as-is, rank-3 conv kernels
// (c_out, c_in, kw) flattened to c_out x (c_in * kw).
Mat weight_matrix_view(const Tensor& w);

// Largest singular value by power iteration. On a fresh state the iteration
// runs to convergence regardless of `iterations`; afterwards it performs
// exactly `iterations` update steps from the warm start (<= 0 means converge).
double estimate_spectral_norm(const Mat& w, SpectralNormState& state, int iterations);

// Converged estimates with a throwaway state.
double spectral_norm(const Mat& w, int max_iterations = 1000, double tol = 1e-12);
// Smallest singular value via power iteration on mu*I - W^T W.
double min_singular_value(const Mat& w, int max_iterations = 5000, double tol = 1e-13);

// Rescales w in place to spectral norm `cap` when the estimate exceeds the
// cap, otherwise leaves it untouched. Returns the pre-projection estimate.
double project_spectral_norm(Tensor& w, double cap, SpectralNormState& state,
                             int iterations);

}  // namespace sncpd
