#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sncpd/encoders.hpp"
#include "sncpd/statistics.hpp"

namespace sncpd {

enum class Statistic { Cosine, Mmd };

// Past/future halves around a split index: past = X[i-w : i), future = X[i : i+w).
struct WindowPair {
  std::size_t index = 0;
  Mat past, future;
};

// Split points at w, w + stride, ..., <= t - w.
std::vector<WindowPair> make_window_pairs(const Mat& x, std::size_t w,
                                          std::size_t stride = 1);

struct ScoreOptions {
  Statistic statistic = Statistic::Cosine;
  double mmd_sigma = 0.0;  // 0 picks the median heuristic over sampled rows
  std::uint64_t seed = 0;  // bandwidth subsampling only
};

struct DetectionTrace {
  std::vector<std::size_t> index;
  std::vector<double> statistic;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  double sigma = 0.0;       // bandwidth used by the mmd statistic
  std::size_t window = 0;
  std::size_t stride = 1;

  bool has_threshold() const { return threshold == threshold; }
  // Alarms are exactly the points with statistic > threshold.
  std::vector<bool> alarms() const;
  std::vector<std::size_t> alarm_indices() const;
};

// One statistic value per pair. A null encoder scores the raw windows. Cosine
// compares the pooled embeddings of the halves, mmd the two w-length embedded
// sequences.
DetectionTrace score_pairs(const std::vector<WindowPair>& pairs,
                           const EncoderModel* encoder, const ScoreOptions& opt);

struct F1Report {
  std::size_t margin = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;  // runs of alarms away from any detection
  std::size_t false_negatives = 0;
};

// A change point counts as detected when at least one alarm lands within
// margin of it. Alarms within twice the margin of a detected change point
// belong to that detection; the rest are collapsed into runs (indices closer
// than run_gap) and each run costs one false positive.
F1Report margin_f1(const std::vector<std::size_t>& alarms,
                   const std::vector<std::size_t>& change_points, std::size_t margin,
                   std::size_t run_gap = 1);

struct SweepResult {
  double threshold = 0.0;
  F1Report report;
  std::size_t candidates = 0;
};

// Grid search over midpoints of adjacent unique statistic values; ties on F1
// go to the smallest maximizing threshold.
SweepResult threshold_sweep(const DetectionTrace& trace,
                            const std::vector<std::size_t>& change_points,
                            std::size_t margin);

// --- representation dynamics ---

struct DynamicsOptions {
  std::size_t window = 50;
  std::size_t subsequence = 300;  // spliced stretch; second half is replaced
};

struct DynamicsCurve {
  std::vector<std::size_t> offsets;   // window start within the stretch
  std::vector<double> similarity;     // averaged over usable change points
  std::size_t used = 0, skipped = 0;
};

// For each change point, compares a stretch ending at the change point with a
// copy whose second half is replaced by the data right after it; the curves of
// pooled-embedding cosine similarity are averaged.
DynamicsCurve dynamics_experiment(const EncoderModel& model, const Mat& series,
                                  const std::vector<std::size_t>& change_points,
                                  const DynamicsOptions& opt = {});

// --- rejection curve ---

struct GaussianFit {
  std::vector<double> mean;
  Mat cov;
};

GaussianFit fit_gaussian(const Mat& rows);

std::vector<double> mahalanobis_scores(const Mat& rows, const GaussianFit& fit,
                                       double ridge = 1e-6);

struct RejectionPoint {
  double fraction_kept = 1.0;
  std::size_t kept = 0;
  double f1 = 0.0;
};

struct RejectionCurve {
  double threshold = 0.0;   // frozen at the full-set optimum
  double baseline_f1 = 0.0;
  std::vector<RejectionPoint> points;  // one per removal step
};

struct RejectionOptions {
  std::size_t window = 50;
  Statistic statistic = Statistic::Cosine;
  std::size_t margin = 50;
  std::size_t reference_stride = 0;  // 0 = max(1, window / 5)
  double ridge = 1e-6;
  std::uint64_t seed = 0;
};

// Scores the test series, freezes the threshold at its full-set optimum, fits
// a Gaussian to pooled embeddings of reference windows, then repeatedly drops
// the 5% of remaining pairs with the largest Mahalanobis distance, recording
// F1 after each removal until about 5% of the pairs remain.
RejectionCurve rejection_curve(const EncoderModel& model, const Mat& reference,
                               const Mat& test,
                               const std::vector<std::size_t>& test_change_points,
                               const RejectionOptions& opt);

// --- two-sample test power ---

using SampleGenerator = std::function<Mat(std::size_t, Rng&)>;

// n iid draws from N(mean, sd^2 I) per call.
SampleGenerator gaussian_generator(std::vector<double> mean, double sd);

struct PowerOptions {
  std::vector<std::size_t> sizes{25, 50, 100, 200};
  double alpha = 0.05;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  double sigma = 0.0;  // 0 = median heuristic per test per space
};

struct PowerRow {
  std::size_t n = 0;
  double type2_raw = 0.0, type2_embedded = 0.0;
  double null_reject_raw = 0.0, null_reject_embedded = 0.0;
};

struct PowerResult {
  std::vector<PowerRow> rows;
  double slope_raw = 0.0, slope_embedded = 0.0;  // log type-II vs log n
  double clamp = 0.0;                            // error floor used in the fit
};

// Monte-Carlo type-II error of the level-alpha mmd test for samples from
// p_inf vs p0, in raw space and through the encoder (null encoder skips the
// embedded columns). Null calibration runs p_inf vs itself.
PowerResult mmd_power_experiment(const SampleGenerator& p_inf, const SampleGenerator& p0,
                                 const EncoderModel* encoder, const PowerOptions& opt);

}  // namespace sncpd
