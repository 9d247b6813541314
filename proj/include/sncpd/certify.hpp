#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sncpd/encoders.hpp"
#include "sncpd/statistics.hpp"

namespace sncpd {

struct InvertOptions {
  int max_iterations = 200;
  double tol = 1e-10;
};

struct InvertResult {
  Mat x;
  int iterations = 0;
  double residual = 0.0;
};

// Fixed-point inversion x_{k+1} = y - g_l(x_k) of a single residual block.
// Converges geometrically while the branch is a contraction; throws
// ConvergenceError otherwise.
InvertResult invert_residual_block(const EncoderModel& m, std::size_t l, const Mat& y,
                                   const InvertOptions& opt = {});

// Inverts the whole block stack by peeling blocks in reverse order.
InvertResult invert_hidden(const EncoderModel& m, const Mat& y,
                           const InvertOptions& opt = {});

// Preimage under the affine input map (must be square).
Mat invert_input_map(const EncoderModel& m, const Mat& h);

// Full preimage; requires an identity head.
InvertResult invert_encoder(const EncoderModel& m, const Mat& y,
                            const InvertOptions& opt = {});

struct CertifyOptions {
  std::size_t pairs = 1000;
  std::size_t probe_rows = 1;  // rows per probe window
  std::uint64_t seed = 0;
  double cap_slack = 1e-4;
  // kernel preservation probe
  double kernel_sigma = 1.0;
};

struct CertificationReport {
  // norm cap
  double cap = 0.0;
  double cap_slack = 0.0;
  std::vector<double> layer_norms;
  double max_layer_norm = 0.0;
  bool cap_ok = false;

  // distance band
  std::size_t depth = 0;
  double alpha = 0.0;       // largest residual-branch Lipschitz bound
  double l1 = 0.0, l2 = 0.0;  // (1 -/+ alpha)^L for the block stack
  double affine_smin = 1.0, affine_smax = 1.0;  // input map and head factors
  double l1_total = 0.0, l2_total = 0.0;
  std::size_t pairs = 0, skipped = 0;
  double ratio_min = 0.0, ratio_max = 0.0;
  bool band_ok = false;

  // kernel ratio band
  bool kernel_checked = false;
  double kernel_sigma = 0.0;
  std::size_t kernel_window = 0;
  double kernel_c_lower = 0.0, kernel_c_upper = 0.0;
  double kernel_ratio_min = 0.0, kernel_ratio_max = 0.0;
  bool kernel_ok = false;

  bool passed() const;
  std::string to_kv() const;
};

// Norm cap audit plus a sampled check of the distance band. Probe points are
// rows on the unit sphere.
CertificationReport certify_bilipschitz(const EncoderModel& m,
                                        const CertifyOptions& opt = {});

// Sampled check that the embedding kernel stays within the analytic envelope
// around the observation kernel. Fills the kernel_* fields of the report.
void check_kernel_preservation(const EncoderModel& m, CertificationReport& report,
                               const CertifyOptions& opt = {});

struct LrCheck {
  double raw = 0.0;
  double embedded = 0.0;
};

// Log likelihood ratio of a window under two matrix-normal hypotheses,
// computed in the raw space and recomputed from the embedded window pushed
// back through the inverse network. Requires an identity head.
LrCheck lr_preservation_check(const EncoderModel& m, const Mat& x,
                              const MatrixNormalParams& null_params,
                              const MatrixNormalParams& alt_params,
                              const InvertOptions& opt = {});

}  // namespace sncpd
